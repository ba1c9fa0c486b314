#pragma once

#include "recusal/oracle.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace recusal {

enum class OutputMode { label_only, label_and_probs };

std::string to_string(OutputMode m);
OutputMode output_mode_from_string(const std::string& name);

// Per-subset models plus the trained oracle state their configuration needs.
// Model i must be trained exactly on partition subset i; the index and cbe
// pointers are shared so sweeps can reuse them across ensembles.
struct DefendedEnsemble {
    std::vector<Classifier> models;
    std::shared_ptr<const SignatureIndex> index;  // ese / ase / coe
    std::shared_ptr<const CBEOracle> cbe;         // cbe / coe
    OracleConfig oracle;
    OutputMode output_mode = OutputMode::label_and_probs;

    int size() const { return static_cast<int>(models.size()); }
    void validate() const;
};

struct PredictionResponse {
    int label = -1;
    std::optional<Vec> probs;  // mean of participating models, renormalized
    std::optional<int> excluded;
    DecisionSource source = DecisionSource::none;
    int participating = 0;
};

// Most frequent vote wins; ties break to the highest summed confidence for
// the tied class across all participating models, then the lowest class
// index. `votes[i]` pairs with `probs[i]`.
int majority_vote(const std::vector<int>& votes, const std::vector<Vec>& probs);

// The configured oracle's decision for one query.
ExclusionDecision oracle_decide(const DefendedEnsemble& e, const Sample& x);

// Oracle decision, then majority vote over the surviving models. Probs are
// emitted only in label_and_probs mode.
PredictionResponse defended_predict(const DefendedEnsemble& e, const Sample& x);

// Baseline arm: single model, never excludes, participating = 1.
PredictionResponse undefended_predict(const Classifier& full_model, const Sample& x,
                                      OutputMode mode);

}  // namespace recusal
