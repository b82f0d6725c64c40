// SPDX-License-Identifier: Apache-2.0

#include "sqoe/model.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

#include "sqoe/error.hpp"
#include "sqoe/rng.hpp"

namespace sqoe {

using ag::Mat;
using ag::Var;

// ---- configuration -------------------------------------------------------------------

std::string_view to_string(FusionMode m) noexcept {
    switch (m) {
        case FusionMode::none: return "none";
        case FusionMode::swap_kv: return "swap_kv";
        case FusionMode::concat_kv: return "concat_kv";
    }
    return "unknown";
}

FusionMode parse_fusion_mode(std::string_view s) {
    for (auto m : {FusionMode::none, FusionMode::swap_kv, FusionMode::concat_kv}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    if (s == "swap") {
        return FusionMode::swap_kv;
    }
    if (s == "concat") {
        return FusionMode::concat_kv;
    }
    fail(ErrorKind::parse, "unknown fusion mode '" + std::string(s) + "'");
}

std::string_view to_string(BackboneMode m) noexcept {
    return m == BackboneMode::tiny_scratch ? "tiny_scratch" : "imported_frozen";
}

BackboneMode parse_backbone_mode(std::string_view s) {
    if (s == "tiny_scratch") {
        return BackboneMode::tiny_scratch;
    }
    if (s == "imported_frozen") {
        return BackboneMode::imported_frozen;
    }
    fail(ErrorKind::parse, "unknown backbone mode '" + std::string(s) + "'");
}

void LoraConfig::validate() const {
    require(rank >= 1, ErrorKind::invalid_argument, "lora rank must be >= 1");
    require(alpha > 0.0, ErrorKind::invalid_argument, "lora alpha must be positive");
    require(dropout >= 0.0 && dropout < 1.0, ErrorKind::invalid_argument,
            "lora dropout must lie in [0,1)");
    for (const auto& t : targets) {
        require(t == "q" || t == "k" || t == "v" || t == "o", ErrorKind::invalid_argument,
                "unknown lora target '" + t + "'");
    }
}

void ModelConfig::validate() const {
    require(patch_size >= 1 && embed_dim >= 1 && num_layers >= 1 && num_heads >= 1 &&
                mlp_ratio >= 1,
            ErrorKind::invalid_argument, "model dimensions must be positive");
    require(embed_dim % num_heads == 0, ErrorKind::invalid_argument,
            "embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                std::to_string(num_heads));
    require(input_width > 0 && input_height > 0 && input_width % patch_size == 0 &&
                input_height % patch_size == 0,
            ErrorKind::invalid_argument,
            "input " + std::to_string(input_width) + "x" + std::to_string(input_height) +
                " is not divisible by patch_size " + std::to_string(patch_size));
    for (int l : fusion.layers) {
        require(l >= 0 && l < num_layers, ErrorKind::invalid_argument,
                "fusion layer " + std::to_string(l) + " outside [0, num_layers)");
    }
    require(!head_hidden.empty() && head_hidden.back() == 1, ErrorKind::invalid_argument,
            "head_hidden must end in 1");
    for (int w : head_hidden) {
        require(w >= 1, ErrorKind::invalid_argument, "head widths must be positive");
    }
    if (lora) {
        lora->validate();
    }
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
    j = {{"input_width", cfg.input_width},
         {"input_height", cfg.input_height},
         {"patch_size", cfg.patch_size},
         {"embed_dim", cfg.embed_dim},
         {"num_layers", cfg.num_layers},
         {"num_heads", cfg.num_heads},
         {"mlp_ratio", cfg.mlp_ratio},
         {"fusion", {{"mode", to_string(cfg.fusion.mode)}, {"layers", cfg.fusion.layers}}},
         {"head_hidden", cfg.head_hidden},
         {"pooling", "mean_patch_tokens"},
         {"backbone_mode", to_string(cfg.backbone_mode)},
         {"lora", nullptr}};
    if (cfg.lora) {
        j["lora"] = {{"rank", cfg.lora->rank},
                     {"alpha", cfg.lora->alpha},
                     {"dropout", cfg.lora->dropout},
                     {"targets", cfg.lora->targets}};
    }
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
    ModelConfig d;
    cfg.input_width = j.value("input_width", d.input_width);
    cfg.input_height = j.value("input_height", d.input_height);
    cfg.patch_size = j.value("patch_size", d.patch_size);
    cfg.embed_dim = j.value("embed_dim", d.embed_dim);
    cfg.num_layers = j.value("num_layers", d.num_layers);
    cfg.num_heads = j.value("num_heads", d.num_heads);
    cfg.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
    cfg.fusion = d.fusion;
    if (j.contains("fusion")) {
        const auto& f = j.at("fusion");
        cfg.fusion.mode = parse_fusion_mode(f.value("mode", std::string("concat_kv")));
        if (f.contains("layers")) {
            cfg.fusion.layers = f.at("layers").get<std::set<int>>();
        }
    }
    cfg.head_hidden = j.value("head_hidden", d.head_hidden);
    const auto pooling = j.value("pooling", std::string("mean_patch_tokens"));
    require(pooling == "mean_patch_tokens", ErrorKind::parse,
            "unsupported pooling '" + pooling + "'");
    cfg.backbone_mode = parse_backbone_mode(j.value("backbone_mode", std::string("tiny_scratch")));
    cfg.lora.reset();
    if (j.contains("lora") && !j.at("lora").is_null()) {
        const auto& l = j.at("lora");
        LoraConfig lc;
        lc.rank = l.value("rank", lc.rank);
        lc.alpha = l.value("alpha", lc.alpha);
        lc.dropout = l.value("dropout", lc.dropout);
        if (l.contains("targets")) {
            lc.targets = l.at("targets").get<std::set<std::string>>();
        }
        cfg.lora = lc;
    }
    cfg.validate();
}

void TrainConfig::validate() const {
    require(learning_rate > 0.0, ErrorKind::invalid_argument, "learning_rate must be positive");
    require(batch_size >= 1, ErrorKind::invalid_argument, "batch_size must be >= 1");
    require(margin > 0.0, ErrorKind::invalid_argument, "margin must be positive");
    require(epochs >= 1, ErrorKind::invalid_argument, "epochs must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
    j = {{"learning_rate", cfg.learning_rate},
         {"batch_size", cfg.batch_size},
         {"margin", cfg.margin},
         {"epochs", cfg.epochs},
         {"consensus_weighting", cfg.consensus_weighting},
         {"optimizer",
          {{"name", "adam"},
           {"beta1", cfg.adam_beta1},
           {"beta2", cfg.adam_beta2},
           {"eps", cfg.adam_eps}}},
         {"seed", cfg.seed},
         {"target_train_accuracy", nullptr}};
    if (cfg.target_train_accuracy) {
        j["target_train_accuracy"] = *cfg.target_train_accuracy;
    }
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
    TrainConfig d;
    cfg.learning_rate = j.value("learning_rate", d.learning_rate);
    cfg.batch_size = j.value("batch_size", d.batch_size);
    cfg.margin = j.value("margin", d.margin);
    cfg.epochs = j.value("epochs", d.epochs);
    cfg.consensus_weighting = j.value("consensus_weighting", d.consensus_weighting);
    cfg.adam_beta1 = d.adam_beta1;
    cfg.adam_beta2 = d.adam_beta2;
    cfg.adam_eps = d.adam_eps;
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        const auto name = o.value("name", std::string("adam"));
        require(name == "adam", ErrorKind::parse, "unsupported optimizer '" + name + "'");
        cfg.adam_beta1 = o.value("beta1", d.adam_beta1);
        cfg.adam_beta2 = o.value("beta2", d.adam_beta2);
        cfg.adam_eps = o.value("eps", d.adam_eps);
    }
    cfg.seed = j.value("seed", d.seed);
    cfg.target_train_accuracy.reset();
    if (j.contains("target_train_accuracy") && !j.at("target_train_accuracy").is_null()) {
        cfg.target_train_accuracy = j.at("target_train_accuracy").get<double>();
    }
    cfg.validate();
}

// ---- input -----------------------------------------------------------------------------

namespace {

constexpr std::array<double, 3> kMean = {0.485, 0.456, 0.406};
constexpr std::array<double, 3> kStd = {0.229, 0.224, 0.225};

/// Resize to cover the target, then center crop. Downscaling averages the
/// source footprint of each output pixel; upscaling samples bilinearly.
FloatPlane cover_crop(const FloatPlane& src, int out_w, int out_h) {
    if (src.width() == out_w && src.height() == out_h) {
        return src;
    }
    const double s = std::max(static_cast<double>(out_w) / src.width(),
                              static_cast<double>(out_h) / src.height());
    const double off_x = (src.width() * s - out_w) / 2.0;
    const double off_y = (src.height() * s - out_h) / 2.0;
    FloatPlane out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            if (s >= 1.0) {
                const auto sx = static_cast<float>((x + off_x + 0.5) / s - 0.5);
                const auto sy = static_cast<float>((y + off_y + 0.5) / s - 0.5);
                for (int c = 0; c < 3; ++c) {
                    out.at(x, y, c) = src.sample_bilinear(sx, sy, c);
                }
                continue;
            }
            const int x0 = std::clamp(static_cast<int>(std::floor((x + off_x) / s)), 0, src.width() - 1);
            const int x1 = std::clamp(static_cast<int>(std::floor((x + 1 + off_x) / s)), x0 + 1, src.width());
            const int y0 = std::clamp(static_cast<int>(std::floor((y + off_y) / s)), 0, src.height() - 1);
            const int y1 = std::clamp(static_cast<int>(std::floor((y + 1 + off_y) / s)), y0 + 1, src.height());
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int yy = y0; yy < y1; ++yy) {
                    for (int xx = x0; xx < x1; ++xx) {
                        acc += src.at(xx, yy, c);
                    }
                }
                out.at(x, y, c) = static_cast<float>(acc / ((x1 - x0) * (y1 - y0)));
            }
        }
    }
    return out;
}

Mat patchify(const ImagePlane& view, const ModelConfig& cfg) {
    const FloatPlane f = cover_crop(to_float(view), cfg.input_width, cfg.input_height);
    const int p = cfg.patch_size;
    Mat out(cfg.num_patches(), cfg.patch_dim());
    for (int gy = 0; gy < cfg.grid_height(); ++gy) {
        for (int gx = 0; gx < cfg.grid_width(); ++gx) {
            const auto row = gy * cfg.grid_width() + gx;
            for (int py = 0; py < p; ++py) {
                for (int px = 0; px < p; ++px) {
                    for (int c = 0; c < 3; ++c) {
                        const double v = f.at(gx * p + px, gy * p + py, c);
                        out(row, (py * p + px) * 3 + c) = (v - kMean[c]) / kStd[c];
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

ModelInput prepare_input(const StereoImage& stereo, const ModelConfig& cfg) {
    require(stereo.width() > 0 && stereo.height() > 0, ErrorKind::invalid_argument,
            "cannot score an empty stereo image");
    return {patchify(stereo.left(), cfg), patchify(stereo.right(), cfg)};
}

// ---- parameters ----------------------------------------------------------------------

void ParameterStore::add(const std::string& name, Mat init) {
    require(!contains(name), ErrorKind::invalid_argument, "duplicate parameter '" + name + "'");
    params_.emplace(name, Var::parameter(std::move(init)));
}

const Var& ParameterStore::at(const std::string& name) const {
    const auto it = params_.find(name);
    require(it != params_.end(), ErrorKind::not_found, "unknown parameter '" + name + "'");
    return it->second;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) {
        n += static_cast<std::size_t>(p.value().size());
    }
    return n;
}

void ParameterStore::zero_grad() const {
    for (const auto& [name, p] : params_) {
        p.zero_grad();
    }
}

bool is_head_parameter(const std::string& name) { return name.rfind("head.", 0) == 0; }
bool is_lora_parameter(const std::string& name) { return name.find(".lora_") != std::string::npos; }

namespace {

Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = stddev * rng.normal();
    }
    return m;
}

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform(-bound, bound);
    }
    return m;
}

std::string block(int layer) { return "blocks." + std::to_string(layer) + "."; }

constexpr std::array<const char*, 4> kProjections = {"q", "k", "v", "o"};

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto E = cfg_.embed_dim;
    const auto P = cfg_.patch_dim();
    const auto H = E * cfg_.mlp_ratio;
    Rng rng(mix_seed(init_seed, 0xba5e));

    params_.add("embed.patch.weight", uniform_init(P, E, 1.0 / std::sqrt(P), rng));
    params_.add("embed.patch.bias", Mat::Zero(1, E));
    params_.add("embed.cls", normal_init(1, E, 0.02, rng));
    params_.add("embed.pos", normal_init(cfg_.num_patches() + 1, E, 0.02, rng));
    for (int l = 0; l < cfg_.num_layers; ++l) {
        const auto b = block(l);
        params_.add(b + "norm1.weight", Mat::Ones(1, E));
        params_.add(b + "norm1.bias", Mat::Zero(1, E));
        for (const char* proj : kProjections) {
            params_.add(b + "attn." + proj + ".weight", normal_init(E, E, 0.02, rng));
            params_.add(b + "attn." + proj + ".bias", Mat::Zero(1, E));
        }
        params_.add(b + "norm2.weight", Mat::Ones(1, E));
        params_.add(b + "norm2.bias", Mat::Zero(1, E));
        params_.add(b + "mlp.fc1.weight", normal_init(E, H, 0.02, rng));
        params_.add(b + "mlp.fc1.bias", Mat::Zero(1, H));
        params_.add(b + "mlp.fc2.weight", normal_init(H, E, 0.02, rng));
        params_.add(b + "mlp.fc2.bias", Mat::Zero(1, E));
    }
    params_.add("norm.weight", Mat::Ones(1, E));
    params_.add("norm.bias", Mat::Zero(1, E));

    int fan_in = 2 * E;
    for (std::size_t j = 0; j < cfg_.head_hidden.size(); ++j) {
        const int out = cfg_.head_hidden[j];
        const double bound = 1.0 / std::sqrt(fan_in);
        params_.add("head." + std::to_string(j) + ".weight", uniform_init(fan_in, out, bound, rng));
        params_.add("head." + std::to_string(j) + ".bias", uniform_init(1, out, bound, rng));
        fan_in = out;
    }

    // Adapters draw from their own stream so base weights do not depend on them.
    if (cfg_.lora) {
        Rng lora_rng(mix_seed(init_seed, 0x10a));
        const int r = cfg_.lora->rank;
        for (int l = 0; l < cfg_.num_layers; ++l) {
            for (const auto& t : cfg_.lora->targets) {
                const auto prefix = block(l) + "attn." + t;
                params_.add(prefix + ".lora_a", uniform_init(E, r, 1.0 / std::sqrt(E), lora_rng));
                params_.add(prefix + ".lora_b", Mat::Zero(r, E));
            }
        }
    }

    for (const auto& [name, p] : params_.all()) {
        p.node()->requires_grad = is_trainable(name);
    }
}

bool Model::is_trainable(const std::string& name) const {
    if (is_head_parameter(name) || is_lora_parameter(name)) {
        return true;
    }
    return cfg_.backbone_mode == BackboneMode::tiny_scratch;
}

// ---- forward ----------------------------------------------------------------------------

namespace {

Var linear(const Var& x, const ParameterStore& p, const std::string& prefix) {
    return ag::add_row(ag::matmul(x, p.at(prefix + ".weight")), p.at(prefix + ".bias"));
}

Var norm(const Var& x, const ParameterStore& p, const std::string& prefix) {
    return ag::layer_norm(x, p.at(prefix + ".weight"), p.at(prefix + ".bias"));
}

}  // namespace

Var Model::embed(const Mat& patches) const {
    require(patches.rows() == cfg_.num_patches() && patches.cols() == cfg_.patch_dim(),
            ErrorKind::dimension_mismatch, "patch matrix does not match the model input size");
    const Var tokens = linear(Var(patches), params_, "embed.patch");
    return ag::add(ag::concat_rows({params_.at("embed.cls"), tokens}), params_.at("embed.pos"));
}

Var Model::projection(int layer, const std::string& which, const Var& x,
                      ForwardContext& ctx) const {
    const auto prefix = block(layer) + "attn." + which;
    Var y = linear(x, params_, prefix);
    if (cfg_.lora && cfg_.lora->targets.count(which) != 0) {
        Var xa = x;
        if (ctx.training && cfg_.lora->dropout > 0.0) {
            require(ctx.rng != nullptr, ErrorKind::state, "training forward needs an rng");
            xa = ag::dropout(x, cfg_.lora->dropout, *ctx.rng);
        }
        const Var delta = ag::matmul(ag::matmul(xa, params_.at(prefix + ".lora_a")),
                                     params_.at(prefix + ".lora_b"));
        y = ag::add(y, ag::scale(delta, cfg_.lora->scaling()));
    }
    return y;
}

Var Model::multi_head(const Var& q, const Var& k, const Var& v) const {
    const int d = cfg_.embed_dim / cfg_.num_heads;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg_.num_heads));
    for (int h = 0; h < cfg_.num_heads; ++h) {
        const Var qh = ag::slice_cols(q, h * d, d);
        const Var kh = ag::slice_cols(k, h * d, d);
        const Var vh = ag::slice_cols(v, h * d, d);
        const Var attn = ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt_d));
        heads.push_back(ag::matmul(attn, vh));
    }
    return heads.size() == 1 ? heads.front() : ag::concat_cols(heads);
}

std::pair<Var, Var> Model::attention(int layer, const Var& h_left, const Var& h_right,
                                     FusionMode mode, ForwardContext& ctx) const {
    require(layer >= 0 && layer < cfg_.num_layers, ErrorKind::invalid_argument,
            "attention layer out of range");
    const Var ql = projection(layer, "q", h_left, ctx);
    const Var kl = projection(layer, "k", h_left, ctx);
    const Var vl = projection(layer, "v", h_left, ctx);
    const Var qr = projection(layer, "q", h_right, ctx);
    const Var kr = projection(layer, "k", h_right, ctx);
    const Var vr = projection(layer, "v", h_right, ctx);
    Var ol;
    Var orr;
    switch (mode) {
        case FusionMode::none:
            ol = multi_head(ql, kl, vl);
            orr = multi_head(qr, kr, vr);
            break;
        case FusionMode::swap_kv:
            ol = multi_head(ql, kr, vr);
            orr = multi_head(qr, kl, vl);
            break;
        case FusionMode::concat_kv:
            // Each stream lists its own keys first.
            ol = multi_head(ql, ag::concat_rows({kl, kr}), ag::concat_rows({vl, vr}));
            orr = multi_head(qr, ag::concat_rows({kr, kl}), ag::concat_rows({vr, vl}));
            break;
    }
    return {projection(layer, "o", ol, ctx), projection(layer, "o", orr, ctx)};
}

Var Model::mlp(int layer, const Var& x) const {
    const auto b = block(layer);
    return linear(ag::gelu(linear(x, params_, b + "mlp.fc1")), params_, b + "mlp.fc2");
}

std::pair<Var, Var> Model::encode(const ModelInput& in, ForwardContext& ctx) const {
    Var xl = embed(in.left);
    Var xr = embed(in.right);
    for (int l = 0; l < cfg_.num_layers; ++l) {
        const auto b = block(l);
        const auto [al, ar] =
            attention(l, norm(xl, params_, b + "norm1"), norm(xr, params_, b + "norm1"),
                      cfg_.fusion.mode_at(l), ctx);
        xl = ag::add(xl, al);
        xr = ag::add(xr, ar);
        xl = ag::add(xl, mlp(l, norm(xl, params_, b + "norm2")));
        xr = ag::add(xr, mlp(l, norm(xr, params_, b + "norm2")));
    }
    return {norm(xl, params_, "norm"), norm(xr, params_, "norm")};
}

Var Model::encode_single(const Mat& patches, ForwardContext& ctx) const {
    Var x = embed(patches);
    for (int l = 0; l < cfg_.num_layers; ++l) {
        const auto b = block(l);
        const Var h = norm(x, params_, b + "norm1");
        const Var q = projection(l, "q", h, ctx);
        const Var k = projection(l, "k", h, ctx);
        const Var v = projection(l, "v", h, ctx);
        x = ag::add(x, projection(l, "o", multi_head(q, k, v), ctx));
        x = ag::add(x, mlp(l, norm(x, params_, b + "norm2")));
    }
    return norm(x, params_, "norm");
}

Var Model::head(const Var& pooled_left, const Var& pooled_right) const {
    Var z = ag::concat_cols({pooled_left, pooled_right});
    const auto n = cfg_.head_hidden.size();
    for (std::size_t j = 0; j < n; ++j) {
        z = linear(z, params_, "head." + std::to_string(j));
        if (j + 1 < n) {
            z = ag::gelu(z);
        }
    }
    return ag::sigmoid(z);
}

Var Model::score_var(const ModelInput& in, ForwardContext& ctx) const {
    const auto [tl, tr] = encode(in, ctx);
    const auto n = cfg_.num_patches();
    return head(ag::mean_rows(ag::slice_rows(tl, 1, n)), ag::mean_rows(ag::slice_rows(tr, 1, n)));
}

QualityScore Model::score(const ModelInput& in) const {
    ag::NoGradGuard no_grad;
    ForwardContext ctx;
    return {score_var(in, ctx).value()(0, 0)};
}

QualityScore Model::score(const StereoImage& stereo) const {
    return score(prepare_input(stereo, cfg_));
}

std::pair<Mat, Mat> encode_pair(const Model& model, const StereoImage& stereo) {
    ag::NoGradGuard no_grad;
    ForwardContext ctx;
    const auto [tl, tr] = model.encode(prepare_input(stereo, model.config()), ctx);
    const auto n = model.config().num_patches();
    return {tl.value().bottomRows(n), tr.value().bottomRows(n)};
}

double hinge_loss(QualityScore preferred, QualityScore other, double margin) {
    require(margin > 0.0, ErrorKind::invalid_argument, "margin must be positive");
    return std::max(0.0, margin + preferred.value - other.value);
}

Var hinge_loss(const Var& preferred, const Var& other, double margin) {
    require(margin > 0.0, ErrorKind::invalid_argument, "margin must be positive");
    return ag::relu(ag::add_scalar(ag::sub(preferred, other), margin));
}

Choice predict_preference(double score_a, double score_b) noexcept {
    return score_b < score_a ? Choice::B : Choice::A;
}

Choice predict_preference(const Sample2AFC& sample, const Model& model,
                          const std::filesystem::path& image_root) {
    const double a = model.score(load_variant(sample.variant_a, image_root)).value;
    const double b = model.score(load_variant(sample.variant_b, image_root)).value;
    return predict_preference(a, b);
}

// ---- training --------------------------------------------------------------------------

nlohmann::json EpochLog::to_json() const {
    nlohmann::json j = {{"epoch", epoch},
                        {"train_loss", train_loss},
                        {"train_accuracy", train_accuracy},
                        {"val_accuracy", nullptr},
                        {"seconds", seconds}};
    if (val_accuracy) {
        j["val_accuracy"] = *val_accuracy;
    }
    return j;
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::update(const std::string& name, const Var& p) {
    auto& [m, v] = moments_[name];
    const Mat& g = p.grad();
    if (m.size() == 0) {
        m = Mat::Zero(g.rows(), g.cols());
        v = Mat::Zero(g.rows(), g.cols());
    }
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    Mat& w = p.mutable_value();
    w.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
}

std::vector<PreparedExample> prepare_examples(const std::vector<TrainExample>& examples,
                                              const ModelConfig& cfg,
                                              const std::filesystem::path& image_root) {
    std::vector<PreparedExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        require(ex.label.majority != Majority::tie, ErrorKind::invalid_argument,
                "sample '" + ex.sample.sample_id + "' has a tied consensus label");
        PreparedExample p;
        p.a = prepare_input(load_variant(ex.sample.variant_a, image_root), cfg);
        p.b = prepare_input(load_variant(ex.sample.variant_b, image_root), cfg);
        p.preferred = ex.label.majority == Majority::A ? Choice::A : Choice::B;
        p.weight = ex.label.weight;
        out.push_back(std::move(p));
    }
    return out;
}

double preference_accuracy(const Model& model, const std::vector<PreparedExample>& examples) {
    require(!examples.empty(), ErrorKind::invalid_argument, "accuracy over an empty set");
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        const auto choice = predict_preference(model.score(ex.a).value, model.score(ex.b).value);
        correct += choice == ex.preferred ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train(Model& model, const std::vector<PreparedExample>& train_set,
                  const std::vector<PreparedExample>& val_set, const TrainConfig& cfg,
                  std::ostream* log_jsonl) {
    cfg.validate();
    require(!train_set.empty(), ErrorKind::invalid_argument, "training set is empty");
    Rng rng(mix_seed(cfg.seed, 0x7a1));
    Adam adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    const auto& params = model.parameters();
    params.zero_grad();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Var> losses;
            ForwardContext ctx{true, &rng};
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = train_set[order[i]];
                const Var sa = model.score_var(ex.a, ctx);
                const Var sb = model.score_var(ex.b, ctx);
                Var loss = ex.preferred == Choice::A ? hinge_loss(sa, sb, cfg.margin)
                                                     : hinge_loss(sb, sa, cfg.margin);
                if (cfg.consensus_weighting) {
                    loss = ag::scale(loss, ex.weight);
                }
                loss_sum += loss.value()(0, 0);
                losses.push_back(std::move(loss));
            }
            const Var batch_loss =
                ag::scale(ag::sum(ag::concat_rows(losses)), 1.0 / static_cast<double>(losses.size()));
            batch_loss.backward();
            adam.step(params, [&](const std::string& name) { return model.is_trainable(name); });
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(train_set.size());
        entry.train_accuracy = preference_accuracy(model, train_set);
        if (!val_set.empty()) {
            entry.val_accuracy = preference_accuracy(model, val_set);
        }
        entry.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (log_jsonl != nullptr) {
            *log_jsonl << entry.to_json().dump() << '\n' << std::flush;
        }
        result.log.push_back(entry);
        if (cfg.target_train_accuracy && entry.train_accuracy >= *cfg.target_train_accuracy) {
            break;
        }
    }
    return result;
}

// ---- persistence ---------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'Q', 'O', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(in.good(), ErrorKind::decode, "truncated checkpoint while reading " + what);
    return v;
}

struct Archive {
    nlohmann::json config;
    std::map<std::string, Mat> tensors;
};

Archive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::io, "cannot open checkpoint '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kMagic, 8) == 0, ErrorKind::decode,
            "'" + path.string() + "' is not a checkpoint");
    const auto version = get<std::uint32_t>(in, "version");
    require(version == kCheckpointVersion, ErrorKind::unsupported,
            "unsupported checkpoint version " + std::to_string(version));
    Archive a;
    const auto json_len = get<std::uint64_t>(in, "config length");
    std::string text(json_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(json_len));
    require(in.good(), ErrorKind::decode, "truncated checkpoint config");
    a.config = nlohmann::json::parse(text);
    const auto count = get<std::uint64_t>(in, "tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = get<std::uint32_t>(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = get<std::uint32_t>(in, "rows");
        const auto cols = get<std::uint32_t>(in, "cols");
        Mat m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
        require(in.good(), ErrorKind::decode, "truncated tensor '" + name + "'");
        a.tensors.emplace(std::move(name), std::move(m));
    }
    return a;
}

void copy_tensor(const Var& dst, const Mat& src, const std::string& name) {
    require(dst.rows() == src.rows() && dst.cols() == src.cols(), ErrorKind::dimension_mismatch,
            "tensor '" + name + "' has shape " + std::to_string(src.rows()) + "x" +
                std::to_string(src.cols()) + ", expected " + std::to_string(dst.rows()) + "x" +
                std::to_string(dst.cols()));
    dst.mutable_value() = src;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::io, "cannot write '" + tmp + "'");
        out.write(kMagic, 8);
        put<std::uint32_t>(out, kCheckpointVersion);
        const std::string cfg = nlohmann::json(model.config()).dump();
        put<std::uint64_t>(out, cfg.size());
        out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
        const auto& all = model.parameters().all();
        put<std::uint64_t>(out, all.size());
        for (const auto& [name, p] : all) {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(p.rows()));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(p.cols()));
            out.write(reinterpret_cast<const char*>(p.value().data()),
                      static_cast<std::streamsize>(sizeof(double) * p.value().size()));
        }
        require(out.good(), ErrorKind::io, "failed writing '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
    const auto archive = read_archive(path);
    Model model(archive.config.get<ModelConfig>());
    for (const auto& [name, p] : model.parameters().all()) {
        const auto it = archive.tensors.find(name);
        require(it != archive.tensors.end(), ErrorKind::decode,
                "checkpoint lacks tensor '" + name + "'");
        copy_tensor(p, it->second, name);
    }
    return model;
}

std::size_t import_backbone(Model& model, const std::filesystem::path& path) {
    const auto archive = read_archive(path);
    std::size_t n = 0;
    for (const auto& [name, p] : model.parameters().all()) {
        if (is_head_parameter(name) || is_lora_parameter(name)) {
            continue;
        }
        const auto it = archive.tensors.find(name);
        if (it != archive.tensors.end()) {
            copy_tensor(p, it->second, name);
            ++n;
        }
    }
    require(n > 0, ErrorKind::decode, "'" + path.string() + "' holds no matching backbone tensors");
    return n;
}

}  // namespace sqoe
