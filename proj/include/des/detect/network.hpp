#pragma once

#include <optional>
#include <string>
#include <vector>

#include "des/config.hpp"
#include "des/core/parameters.hpp"
#include "des/detect/anchors.hpp"
#include "des/detect/nms.hpp"
#include "des/global_activation.hpp"
#include "des/seg_branch.hpp"

namespace des::detect {

/// Everything a forward pass produces, intermediates included.
struct NetworkVars {
    std::vector<Var> sources;      // backbone features at each source layer
    std::vector<Var> ga_inputs;    // what each global activation block (or head, without one) receives
    std::vector<Var> gates;        // C x 1 x 1 per source layer; empty without global activation
    std::vector<Var> head_inputs;  // features the class/box heads read
    std::optional<SegBranchVars> seg;
    Var class_logits;  // anchors x (K + 1)
    Var box_preds;     // anchors x 4
};

struct Prediction {
    Tensor class_probs;  // anchors x (K + 1), rows sum to 1
    Tensor box_preds;    // anchors x 4 encoded offsets
    std::optional<Tensor> seg_probs;
};

/// Toy single-shot detector. The backbone is a stack of 3x3 conv + ReLU +
/// maxpool2 stages (one per backbone width, then extra stages at the last
/// width until the largest source stride). On the first source layer the
/// segmentation branch (variants GS / GS_parallel) replaces X by X' for the
/// head path; every source layer then passes through its global activation
/// block (all variants but baseline) before a 3x3 class head with (K+1)A
/// channels and a 3x3 box head with 4A channels. The backbone itself always
/// continues from the raw features.
class Network {
public:
    /// Validates `cfg` and initializes parameters from cfg.seed.
    explicit Network(const NetConfig& cfg);

    const NetConfig& config() const noexcept { return cfg_; }
    ParameterSet& params() noexcept { return params_; }
    const ParameterSet& params() const noexcept { return params_; }
    const std::vector<SourceLayerSpec>& source_specs() const noexcept { return specs_; }
    const std::vector<AnchorBox>& anchors() const noexcept { return anchors_; }
    /// Side of the segmentation grid (first source layer resolution).
    std::size_t seg_grid_size() const;

    /// `image` must be 3 x input x input.
    NetworkVars forward(Graph& graph, Var image) const;
    Prediction predict(const Tensor& image) const;
    std::vector<Detection> detect(const Tensor& image) const;
    std::vector<Detection> detect(const Tensor& image, const DecodeParams& params) const;

    const std::optional<SegBranchParams>& seg_branch() const noexcept { return seg_; }
    const std::vector<GlobalActivationParams>& ga_blocks() const noexcept { return ga_; }

private:
    NetConfig cfg_;
    ParameterSet params_;
    std::vector<nn::Conv> stages_;
    std::vector<std::size_t> source_stage_;  // stage index whose output is each source layer
    std::vector<SourceLayerSpec> specs_;
    std::vector<AnchorBox> anchors_;
    std::optional<SegBranchParams> seg_;
    std::vector<GlobalActivationParams> ga_;
    std::vector<nn::Conv> class_heads_;
    std::vector<nn::Conv> box_heads_;
};

/// Concatenates per-layer head maps of shape (D A) x H x W into an
/// (sum H W A) x D matrix, row order (layer, row, column, anchor) matching
/// gen_anchors. Channel a*D + d of a map becomes column d of anchor a.
Var flatten_heads(const std::vector<Var>& maps, std::size_t per_anchor);

/// Row-wise softmax of an M x K matrix.
Tensor softmax_rows(const Tensor& logits);

/// Writes `path` (DESTNSR1 tensors back to back, in parameter order) and
/// `path.json` (config plus name -> byte offset and shape).
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace des::detect
