#pragma once

#include <string>
#include <vector>

#include "bankfuse/attention.hpp"

namespace bankfuse {

enum class ArchKind {
    SaOnly,
    CaOnly,
    Sa2Ca,
    Ca2Sa,
    Sca,
    AddBaseline,
    ConcatBaseline,
    Single,
    SingleSa,
};

struct Architecture {
    ArchKind kind = ArchKind::ConcatBaseline;
    int index = 0;  // branch selector for Single / SingleSa

    bool uses_sab() const {
        return kind == ArchKind::SaOnly || kind == ArchKind::Sa2Ca || kind == ArchKind::Ca2Sa ||
               kind == ArchKind::Sca || kind == ArchKind::SingleSa;
    }
    bool uses_cab() const {
        return kind == ArchKind::CaOnly || kind == ArchKind::Sa2Ca || kind == ArchKind::Ca2Sa ||
               kind == ArchKind::Sca;
    }
    bool single_branch() const { return kind == ArchKind::Single || kind == ArchKind::SingleSa; }
};

/// Accepted names: SA_ONLY, CA_ONLY, SA2CA, CA2SA, SCA, ADD, CONCAT,
/// SINGLE<i>, SINGLE_SA<i>. Throws std::invalid_argument otherwise or when
/// the single index is not below branch_count.
Architecture parse_arch(const std::string& name, int branch_count);
std::string arch_name(const Architecture& arch);

/// One fused classifier: optional per-branch SABs, optional CAB, FC head.
/// Branch outputs merge by concatenation in bank order (sum for ADD).
struct FusionModel {
    Architecture arch;
    int branch_count = 0;  // N
    int feature_dim = 0;   // d
    int classes = 0;
    int heads = 1;
    uint64_t init_seed = 0;

    std::vector<SelfAttentionBlock> sab;  // one per branch, or one for SINGLE_SA
    CrossAttentionBlock cab;              // populated when arch.uses_cab()
    Matrix fc_w;                          // head_in_dim x classes
    Matrix fc_b;                          // 1 x classes

    // optional frozen per-branch feature standardization, applied before the
    // blocks; populated by training when enabled
    bool standardize = false;
    std::vector<Matrix> scaler_mean, scaler_std;  // each 1 x d

    int head_in_dim() const {
        return (arch.kind == ArchKind::AddBaseline || arch.single_branch())
                   ? feature_dim
                   : branch_count * feature_dim;
    }
};

FusionModel make_model(const Architecture& arch, int branch_count, int feature_dim, int classes,
                       int heads, uint64_t seed);

struct ParamRef {
    std::string name;
    Matrix* value;
};

/// Canonical parameter enumeration: SAB branches in order (per head, Wq Wk
/// Wv), then CAB branches, then fc.W, fc.b. Checkpoints, initialization and
/// gradient updates all follow this order.
std::vector<ParamRef> parameters(FusionModel& model);
size_t parameter_count(const FusionModel& model);

struct ForwardGraph {
    Value logits;               // B x classes
    std::vector<Value> params;  // aligned with parameters()
};

/// Builds the forward graph for a batch; bank holds one BxD matrix per
/// branch. The graph stays valid while the tape lives.
ForwardGraph forward_graph(Tape& t, const FusionModel& model, const std::vector<Matrix>& bank);

/// Forward values only.
Matrix forward(const FusionModel& model, const std::vector<Matrix>& bank);

// Text checkpoint: one header line, then parameter blocks in canonical order.
void save_checkpoint(const FusionModel& model, const std::string& path);
FusionModel load_checkpoint(const std::string& path);

// shortest round-trip decimal formatting shared by all file writers
std::string format_double(double v);

}  // namespace bankfuse
