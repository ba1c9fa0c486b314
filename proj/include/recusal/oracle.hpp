#pragma once

#include "recusal/dataset.hpp"
#include "recusal/learner.hpp"
#include "recusal/signature.hpp"

#include <optional>
#include <string>
#include <vector>

namespace recusal {

// Which exclusion strategy a decision came from. Chained decisions carry the
// stage that fired; "none" marks no exclusion.
enum class DecisionSource { none, mce, ese, ase, cbe };

std::string to_string(DecisionSource s);

struct ExclusionDecision {
    std::optional<int> excluded;  // subset index in [0, n)
    DecisionSource source = DecisionSource::none;

    bool operator==(const ExclusionDecision&) const = default;
};

// Principal-component projection fitted on member pixels. `components` rows
// are the retained directions (orthonormal); `eigenvalues` keeps the full
// descending spectrum of the biased covariance so the discarded variance
// stays auditable.
struct PCAModel {
    Vec mean;
    Mat components;
    Vec eigenvalues;

    int retained() const { return static_cast<int>(components.rows()); }
    int input_dim() const { return static_cast<int>(mean.size()); }
};

// Rows of `x` are samples. Requires 1 <= m <= columns.
PCAModel fit_pca(const Mat& x, int m);

// Centered projection: components * (x - mean).
Vec pca_project(const PCAModel& p, const Vec& x);

// Classifier-based exclusion state: a feature model over
// [pca projection, reference confidences, reference label] that predicts
// which subset a query came from, gated by the calibrated threshold.
struct CBEOracle {
    PCAModel pca;
    Classifier feature_model;    // outputs = number of subsets
    Classifier reference_model;  // outputs = number of classes
    double tau_eo = 0.0;
};

struct CBEConfig {
    int components = 0;             // 0 = auto: ~9% of the pixel dimension
    double member_fraction = 0.25;  // per-subset share used as member features
    Architecture arch;              // feature model architecture
    TrainConfig train;              // feature model training settings
    std::uint64_t seed = 0;         // member subsampling

    void validate() const;
};

enum class OracleKind { none, mce, ese, ase, cbe, coe };

std::string to_string(OracleKind k);
OracleKind oracle_kind_from_string(const std::string& name);

struct OracleConfig {
    OracleKind kind = OracleKind::none;
    double tau_h = 10.0 / 64.0;
    std::optional<CBEConfig> cbe;

    void validate() const;
};

// Feature vector [pca projection (m), reference probabilities (k),
// predicted label (1)]; length m + k + 1.
Vec cbe_features(const CBEOracle& cbe, const Sample& x);

// Fits PCA on a per-subset member subsample, trains the feature model on
// those members with the subset index as target, then calibrates tau_eo on
// the same members plus the provided nonmembers (which never participate in
// feature-model training and must be id-disjoint from the partition).
CBEOracle train_cbe(const Partition& p, const Dataset& nonmembers,
                    const Classifier& reference_model, const CBEConfig& cfg);

// Grid search over t = j/20, j = 0..20. Accuracy counts members excluded to
// their true subset plus nonmembers left alone; ties resolve to the smallest
// threshold. Rows are feature-model posteriors.
double calibrate_tau_eo(const Mat& member_posteriors, const std::vector<int>& member_subsets,
                        const Mat& nonmember_posteriors);
double calibrate_tau_eo(const CBEOracle& cbe, const Dataset& members, const Partition& p,
                        const Dataset& nonmembers);

// Always excludes exactly one model: each model votes, the vote is settled by
// the ensemble's majority rule, and the model most confident on the elected
// label is excluded (ties to the lowest model index).
ExclusionDecision mce_decide(const std::vector<Classifier>& models, const Sample& x);
ExclusionDecision mce_from_probs(const std::vector<Vec>& probs);

// Exact-digest table lookup; misses mean no exclusion.
ExclusionDecision ese_decide(const SignatureIndex& idx, const Sample& x);

// Nearest perceptual hash within tau_h, or no exclusion.
ExclusionDecision ase_decide(const SignatureIndex& idx, const Sample& x, double tau_h);

// Excludes the feature model's argmax subset iff its confidence reaches
// tau_eo.
ExclusionDecision cbe_decide(const CBEOracle& cbe, const Sample& x);
ExclusionDecision cbe_decide_from_posterior(const Vec& posterior, double tau_eo);

// Chain ese -> ase -> cbe; the first stage that excludes wins and tags the
// decision.
ExclusionDecision coe_decide(const SignatureIndex& idx, const CBEOracle& cbe, const Sample& x,
                             double tau_h);

void save_cbe(const CBEOracle& cbe, const std::string& path);
CBEOracle load_cbe(const std::string& path);

}  // namespace recusal
