// SPDX-License-Identifier: Apache-2.0

#include "sqoe/autograd.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "sqoe/error.hpp"

namespace sqoe::ag {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() noexcept : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void Node::accumulate(const Mat& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

Var::Var(Mat value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var make_result(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward) {
    Var out(std::move(value), false);
    if (!g_grad_enabled) {
        return out;
    }
    for (const auto& p : parents) {
        if (p.requires_grad()) {
            out.node_->requires_grad = true;
            break;
        }
    }
    if (out.node_->requires_grad) {
        out.node_->parents.reserve(parents.size());
        for (auto& p : parents) {
            out.node_->parents.push_back(p.node());
        }
        out.node_->backward = std::move(backward);
    }
    return out;
}

void Var::backward() const {
    require(node_ && node_->value.size() == 1, ErrorKind::invalid_argument,
            "backward() needs a scalar root");
    if (!node_->requires_grad) {
        return;
    }
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->accumulate(Mat::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad.size() != 0) {
            n->backward(*n);
        }
    }
}

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::dimension_mismatch,
            std::string(op) + ": shape mismatch");
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
    require(a.cols() == b.rows(), ErrorKind::dimension_mismatch, "matmul: inner dimension mismatch");
    Mat out;
    out.noalias() = a.value() * b.value();
    return make_result(std::move(out), {a, b}, [](Node& n) {
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        if (pa.requires_grad) {
            Mat g;
            g.noalias() = n.grad * pb.value.transpose();
            pa.accumulate(g);
        }
        if (pb.requires_grad) {
            Mat g;
            g.noalias() = pa.value.transpose() * n.grad;
            pb.accumulate(g);
        }
    });
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
        for (auto& p : n.parents) {
            if (p->requires_grad) {
                p->accumulate(n.grad);
            }
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    return make_result(a.value() - b.value(), {a, b}, [](Node& n) {
        if (parent(n, 0).requires_grad) {
            parent(n, 0).accumulate(n.grad);
        }
        if (parent(n, 1).requires_grad) {
            parent(n, 1).accumulate(-n.grad);
        }
    });
}

Var add_row(const Var& a, const Var& row) {
    require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::dimension_mismatch,
            "add_row: bias must be 1 x cols");
    Mat out = a.value();
    out.rowwise() += row.value().row(0);
    return make_result(std::move(out), {a, row}, [](Node& n) {
        if (parent(n, 0).requires_grad) {
            parent(n, 0).accumulate(n.grad);
        }
        if (parent(n, 1).requires_grad) {
            parent(n, 1).accumulate(n.grad.colwise().sum());
        }
    });
}

Var scale(const Var& a, double s) {
    return make_result(a.value() * s, {a}, [s](Node& n) { parent(n, 0).accumulate(n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
    return make_result((a.value().array() + s).matrix(), {a},
                       [](Node& n) { parent(n, 0).accumulate(n.grad); });
}

Var transpose(const Var& a) {
    return make_result(a.value().transpose(), {a},
                       [](Node& n) { parent(n, 0).accumulate(n.grad.transpose()); });
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), ErrorKind::invalid_argument, "concat_rows: no inputs");
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        require(p.cols() == parts.front().cols(), ErrorKind::dimension_mismatch,
                "concat_rows: column mismatch");
        rows += p.rows();
    }
    Mat out(rows, parts.front().cols());
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    return make_result(std::move(out), parts, [](Node& n) {
        Eigen::Index at = 0;
        for (auto& p : n.parents) {
            const auto k = p->value.rows();
            if (p->requires_grad) {
                p->accumulate(n.grad.middleRows(at, k));
            }
            at += k;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), ErrorKind::invalid_argument, "concat_cols: no inputs");
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        require(p.rows() == parts.front().rows(), ErrorKind::dimension_mismatch,
                "concat_cols: row mismatch");
        cols += p.cols();
    }
    Mat out(parts.front().rows(), cols);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    return make_result(std::move(out), parts, [](Node& n) {
        Eigen::Index at = 0;
        for (auto& p : n.parents) {
            const auto k = p->value.cols();
            if (p->requires_grad) {
                p->accumulate(n.grad.middleCols(at, k));
            }
            at += k;
        }
    });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
    require(start >= 0 && count >= 0 && start + count <= a.rows(), ErrorKind::dimension_mismatch,
            "slice_rows: out of range");
    return make_result(a.value().middleRows(start, count), {a}, [start, count](Node& n) {
        Node& p = parent(n, 0);
        Mat g = Mat::Zero(p.value.rows(), p.value.cols());
        g.middleRows(start, count) = n.grad;
        p.accumulate(g);
    });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorKind::dimension_mismatch,
            "slice_cols: out of range");
    return make_result(a.value().middleCols(start, count), {a}, [start, count](Node& n) {
        Node& p = parent(n, 0);
        Mat g = Mat::Zero(p.value.rows(), p.value.cols());
        g.middleCols(start, count) = n.grad;
        p.accumulate(g);
    });
}

Var mean_rows(const Var& a) {
    require(a.rows() > 0, ErrorKind::invalid_argument, "mean_rows: empty input");
    const auto rows = a.rows();
    return make_result(a.value().colwise().mean(), {a}, [rows](Node& n) {
        Mat g = n.grad.replicate(rows, 1) / static_cast<double>(rows);
        parent(n, 0).accumulate(g);
    });
}

Var sum(const Var& a) {
    Mat out(1, 1);
    out(0, 0) = a.value().sum();
    return make_result(std::move(out), {a}, [](Node& n) {
        Node& p = parent(n, 0);
        p.accumulate(Mat::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0)));
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const auto d = x.cols();
    require(gamma.rows() == 1 && gamma.cols() == d && beta.rows() == 1 && beta.cols() == d,
            ErrorKind::dimension_mismatch, "layer_norm: affine shape mismatch");
    const Mat& xv = x.value();
    Mat xhat(xv.rows(), d);
    Eigen::VectorXd inv_std(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const double mu = xv.row(r).mean();
        const double var = (xv.row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
    }
    Mat out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
    out.rowwise() += beta.value().row(0);
    return make_result(std::move(out), {x, gamma, beta},
                       [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
        Node& px = parent(n, 0);
        Node& pg = parent(n, 1);
        Node& pb = parent(n, 2);
        if (pg.requires_grad) {
            pg.accumulate((n.grad.array() * xhat.array()).colwise().sum().matrix());
        }
        if (pb.requires_grad) {
            pb.accumulate(n.grad.colwise().sum());
        }
        if (px.requires_grad) {
            const Mat gh = (n.grad.array().rowwise() * pg.value.row(0).array()).matrix();
            const auto d_ = static_cast<double>(gh.cols());
            Mat gx(gh.rows(), gh.cols());
            for (Eigen::Index r = 0; r < gh.rows(); ++r) {
                const double mean_g = gh.row(r).mean();
                const double mean_gx = gh.row(r).dot(xhat.row(r)) / d_;
                gx.row(r) = inv_std(r) *
                            (gh.row(r).array() - mean_g - xhat.row(r).array() * mean_gx);
            }
            px.accumulate(gx);
        }
    });
}

Var gelu(const Var& a) {
    const Mat& x = a.value();
    Mat out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
    return make_result(std::move(out), {a}, [](Node& n) {
        Node& p = parent(n, 0);
        const Mat d = p.value.unaryExpr([](double v) {
            const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + v * pdf;
        });
        p.accumulate((n.grad.array() * d.array()).matrix());
    });
}

Var sigmoid(const Var& a) {
    Mat out = a.value().unaryExpr([](double v) {
        if (v >= 0.0) {
            return 1.0 / (1.0 + std::exp(-v));
        }
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    Mat s = out;
    return make_result(std::move(out), {a}, [s = std::move(s)](Node& n) {
        parent(n, 0).accumulate((n.grad.array() * s.array() * (1.0 - s.array())).matrix());
    });
}

Var relu(const Var& a) {
    return make_result(a.value().cwiseMax(0.0), {a}, [](Node& n) {
        Node& p = parent(n, 0);
        p.accumulate((n.grad.array() * (p.value.array() > 0.0).cast<double>()).matrix());
    });
}

Var softmax_rows(const Var& a) {
    Mat out = a.value();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double mx = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - mx).exp();
        out.row(r) /= out.row(r).sum();
    }
    Mat y = out;
    return make_result(std::move(out), {a}, [y = std::move(y)](Node& n) {
        Mat g(y.rows(), y.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double dot = n.grad.row(r).dot(y.row(r));
            g.row(r) = y.row(r).array() * (n.grad.row(r).array() - dot);
        }
        parent(n, 0).accumulate(g);
    });
}

Var dropout(const Var& a, double p, Rng& rng) {
    require(p >= 0.0 && p < 1.0, ErrorKind::invalid_argument, "dropout: p must lie in [0,1)");
    if (p == 0.0) {
        return a;
    }
    Mat mask(a.rows(), a.cols());
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng.bernoulli(p) ? 0.0 : keep;
    }
    Mat out = (a.value().array() * mask.array()).matrix();
    return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& n) {
        parent(n, 0).accumulate((n.grad.array() * mask.array()).matrix());
    });
}

}  // namespace sqoe::ag
