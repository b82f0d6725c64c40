// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "sqoe/rng.hpp"

namespace sqoe::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
    Mat value;
    Mat grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const Mat& g);
};

/// Handle to a node of a dynamically built reverse-mode graph.
class Var {
public:
    Var() = default;
    explicit Var(Mat value, bool requires_grad = false);

    /// Leaf that keeps its identity across graphs (model parameters).
    static Var parameter(Mat value) { return Var(std::move(value), true); }

    [[nodiscard]] const Mat& value() const { return node_->value; }
    // Handle semantics: copies share the node, so mutation is not a const concern.
    [[nodiscard]] Mat& mutable_value() const { return node_->value; }
    [[nodiscard]] const Mat& grad() const { return node_->grad; }
    [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
    [[nodiscard]] Eigen::Index rows() const { return node_->value.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return node_->value.cols(); }
    [[nodiscard]] bool defined() const noexcept { return static_cast<bool>(node_); }
    [[nodiscard]] const std::shared_ptr<Node>& node() const noexcept { return node_; }

    void zero_grad() const { node_->grad.resize(0, 0); }

    /// Backpropagates from this 1x1 node, accumulating into every
    /// reachable node that requires a gradient.
    void backward() const;

private:
    std::shared_ptr<Node> node_;

    friend Var make_result(Mat value, std::vector<Var> parents,
                           std::function<void(Node&)> backward);
};

bool grad_enabled() noexcept;

/// Disables graph construction on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() noexcept;
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds an interior node; the closure is dropped when no parent needs grad.
Var make_result(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var transpose(const Var& a);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// 1 x m mean over the rows of a.
Var mean_rows(const Var& a);
Var sum(const Var& a);
/// Row-wise layer normalization with affine gamma/beta (1 x m each).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6);
/// Exact (erf) GELU.
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var softmax_rows(const Var& a);
/// Inverted dropout; identity when p == 0.
Var dropout(const Var& a, double p, Rng& rng);

}  // namespace sqoe::ag
