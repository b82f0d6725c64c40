// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sqoe/autograd.hpp"
#include "sqoe/dataset.hpp"
#include "sqoe/image.hpp"

namespace sqoe {

enum class FusionMode { none, swap_kv, concat_kv };
enum class Pooling { mean_patch_tokens };
enum class BackboneMode { tiny_scratch, imported_frozen };

std::string_view to_string(FusionMode m) noexcept;
FusionMode parse_fusion_mode(std::string_view s);
std::string_view to_string(BackboneMode m) noexcept;
BackboneMode parse_backbone_mode(std::string_view s);

struct FusionConfig {
    FusionMode mode = FusionMode::concat_kv;
    std::set<int> layers = {1, 3, 5};

    /// Mode in effect at `layer`; none outside the configured set.
    [[nodiscard]] FusionMode mode_at(int layer) const {
        return layers.count(layer) != 0 ? mode : FusionMode::none;
    }

    friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

struct LoraConfig {
    int rank = 8;
    double alpha = 32.0;
    double dropout = 0.1;
    /// Attention projections to adapt: any of "q", "k", "v", "o".
    std::set<std::string> targets = {"q", "k", "v", "o"};

    [[nodiscard]] double scaling() const { return alpha / static_cast<double>(rank); }
    void validate() const;

    friend bool operator==(const LoraConfig&, const LoraConfig&) = default;
};

struct ModelConfig {
    int input_width = 128;
    int input_height = 72;
    int patch_size = 8;
    int embed_dim = 192;
    int num_layers = 6;
    int num_heads = 3;
    int mlp_ratio = 4;
    FusionConfig fusion;
    /// Widths of the scoring head's layers; the last one must be 1.
    std::vector<int> head_hidden = {256, 64, 1};
    Pooling pooling = Pooling::mean_patch_tokens;
    BackboneMode backbone_mode = BackboneMode::tiny_scratch;
    std::optional<LoraConfig> lora;

    [[nodiscard]] int grid_width() const { return input_width / patch_size; }
    [[nodiscard]] int grid_height() const { return input_height / patch_size; }
    [[nodiscard]] int num_patches() const { return grid_width() * grid_height(); }
    [[nodiscard]] int patch_dim() const { return patch_size * patch_size * 3; }

    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

struct TrainConfig {
    double learning_rate = 3e-5;
    int batch_size = 16;
    double margin = 0.05;
    int epochs = 10;
    bool consensus_weighting = true;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    /// Stop once training accuracy reaches this value (checked after each epoch).
    std::optional<double> target_train_accuracy;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// Sigmoid output in (0,1); lower is better.
struct QualityScore {
    double value = 0.5;
};

/// Per-view patch matrices (num_patches x patch_dim), already normalized.
struct ModelInput {
    ag::Mat left;
    ag::Mat right;
};

/// Resize-to-cover, center crop to the input size, ImageNet normalization,
/// then row-major patch extraction.
ModelInput prepare_input(const StereoImage& stereo, const ModelConfig& cfg);

struct ForwardContext {
    bool training = false;
    Rng* rng = nullptr;  // needed only when training with LoRA dropout
};

/// Named parameters in a stable (sorted) order.
class ParameterStore {
public:
    void add(const std::string& name, ag::Mat init);
    [[nodiscard]] const ag::Var& at(const std::string& name) const;
    [[nodiscard]] bool contains(const std::string& name) const { return params_.count(name) != 0; }
    [[nodiscard]] const std::map<std::string, ag::Var>& all() const noexcept { return params_; }
    [[nodiscard]] std::size_t scalar_count() const;
    void zero_grad() const;

private:
    std::map<std::string, ag::Var> params_;
};

bool is_head_parameter(const std::string& name);
bool is_lora_parameter(const std::string& name);

/// Twin weight-shared patch transformer with cross-view fusion and a
/// pooled-concat scoring head.
class Model {
public:
    explicit Model(ModelConfig cfg, std::uint64_t init_seed = 0);

    [[nodiscard]] const ModelConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const ParameterStore& parameters() const noexcept { return params_; }
    [[nodiscard]] ParameterStore& parameters() noexcept { return params_; }
    /// Whether the optimizer updates `name` under the configured backbone mode.
    [[nodiscard]] bool is_trainable(const std::string& name) const;

    /// Tokens (cls first, then patches) of both streams after the final norm.
    [[nodiscard]] std::pair<ag::Var, ag::Var> encode(const ModelInput& in, ForwardContext& ctx) const;
    /// One stream through the same encoder with fusion disabled.
    [[nodiscard]] ag::Var encode_single(const ag::Mat& patches, ForwardContext& ctx) const;
    /// Attention sublayer (projections, multi-head attention, output
    /// projection) of `layer` for both streams under `mode`.
    [[nodiscard]] std::pair<ag::Var, ag::Var> attention(int layer, const ag::Var& h_left,
                                                        const ag::Var& h_right, FusionMode mode,
                                                        ForwardContext& ctx) const;
    /// Scoring head on the two pooled 1 x embed_dim vectors; returns the 1x1 sigmoid output.
    [[nodiscard]] ag::Var head(const ag::Var& pooled_left, const ag::Var& pooled_right) const;
    /// Full forward to the 1x1 score node.
    [[nodiscard]] ag::Var score_var(const ModelInput& in, ForwardContext& ctx) const;

    [[nodiscard]] QualityScore score(const ModelInput& in) const;
    [[nodiscard]] QualityScore score(const StereoImage& stereo) const;

private:
    [[nodiscard]] ag::Var embed(const ag::Mat& patches) const;
    [[nodiscard]] ag::Var projection(int layer, const std::string& which, const ag::Var& x,
                                     ForwardContext& ctx) const;
    [[nodiscard]] ag::Var mlp(int layer, const ag::Var& x) const;
    [[nodiscard]] ag::Var multi_head(const ag::Var& q, const ag::Var& k, const ag::Var& v) const;

    ModelConfig cfg_;
    ParameterStore params_;
};

/// Patch tokens (cls excluded) of both views after the final norm, eval mode.
std::pair<ag::Mat, ag::Mat> encode_pair(const Model& model, const StereoImage& stereo);

double hinge_loss(QualityScore preferred, QualityScore other, double margin);
ag::Var hinge_loss(const ag::Var& preferred, const ag::Var& other, double margin);

/// The variant with the lower score; ties go to A.
Choice predict_preference(double score_a, double score_b) noexcept;
Choice predict_preference(const Sample2AFC& sample, const Model& model,
                          const std::filesystem::path& image_root);

// ---- training ------------------------------------------------------------------------

struct TrainExample {
    Sample2AFC sample;
    ConsensusLabel label;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_accuracy;
    double seconds = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct TrainResult {
    std::vector<EpochLog> log;
};

class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps);
    /// Updates every parameter accepted by `trainable`, then clears all grads.
    template <typename Pred>
    void step(const ParameterStore& params, Pred trainable);

private:
    void update(const std::string& name, const ag::Var& p);

    double lr_, beta1_, beta2_, eps_;
    long step_ = 0;
    std::map<std::string, std::pair<ag::Mat, ag::Mat>> moments_;
};

template <typename Pred>
void Adam::step(const ParameterStore& params, Pred trainable) {
    ++step_;
    for (const auto& [name, p] : params.all()) {
        if (trainable(name) && p.grad().size() != 0) {
            update(name, p);
        }
    }
    params.zero_grad();
}

/// Preprocessed inputs for both variants of each example.
struct PreparedExample {
    ModelInput a;
    ModelInput b;
    Choice preferred = Choice::A;
    double weight = 1.0;
};

std::vector<PreparedExample> prepare_examples(const std::vector<TrainExample>& examples,
                                              const ModelConfig& cfg,
                                              const std::filesystem::path& image_root);

/// 2AFC accuracy of the eval-mode model against the preferred labels.
double preference_accuracy(const Model& model, const std::vector<PreparedExample>& examples);

/// Siamese hinge training. `log_jsonl`, when set, receives one line per epoch.
TrainResult train(Model& model, const std::vector<PreparedExample>& train_set,
                  const std::vector<PreparedExample>& val_set, const TrainConfig& cfg,
                  std::ostream* log_jsonl = nullptr);

// ---- persistence ---------------------------------------------------------------------

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
/// Copies every backbone tensor present in `path` (head and LoRA tensors are
/// skipped); shapes must match. Returns the number of tensors imported.
std::size_t import_backbone(Model& model, const std::filesystem::path& path);

}  // namespace sqoe
