#pragma once

#include "recusal/dataset.hpp"
#include "recusal/ensemble.hpp"
#include "recusal/learner.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace recusal {

// The only view an adversary gets of a model: a name for reporting, the
// declared output mode and a query function. Factories below copy the
// underlying model so the target owns everything it needs.
struct TargetModel {
    std::string name;
    OutputMode output_mode = OutputMode::label_and_probs;
    int num_classes = 0;
    std::function<PredictionResponse(const Sample&)> predict;

    void validate() const;
};

TargetModel make_target(const DefendedEnsemble& e, std::string name);
TargetModel make_target(const Classifier& model, OutputMode mode, std::string name);

// Ground-truth pools for mounting an attack. The adversary split trains
// attack models; the evaluation split is only ever scored. Invariants:
// all four datasets are pairwise id-disjoint and the evaluation split is
// balanced (equal member and non-member counts).
struct AttackDataset {
    Dataset adversary_members;
    Dataset adversary_nonmembers;
    Dataset eval_members;
    Dataset eval_nonmembers;

    void validate() const;
};

// Carves an attack dataset out of a member pool and a non-member pool:
// roughly `adversary_fraction` of each pool (stratified by class) goes to
// the adversary, the remainder forms the evaluation split, truncated to
// equal counts. Ids are preserved.
AttackDataset split_attack_dataset(const Dataset& members, const Dataset& nonmembers,
                                   double adversary_fraction, std::uint64_t seed);

struct AttackScore {
    std::uint64_t sample_id = 0;
    int true_membership = 0;  // 1 = member, 0 = non-member
    double score = 0.0;       // higher means more member-like
};

struct AttackResult {
    std::string attack_name;
    std::string target_name;
    std::vector<AttackScore> scores;  // evaluation members first, then non-members

    std::vector<double> score_values() const;
    std::vector<int> membership_bits() const;
    void validate() const;
};

double result_auc(const AttackResult& r);
double result_advantage(const AttackResult& r);

enum class AttackModelKind { lr, mlp };
std::string to_string(AttackModelKind k);

struct AttackModelConfig {
    int mlp_hidden = 64;    // single hidden layer for the mlp attack
    int feature_count = 0;  // keep only the top-k sorted posteriors; 0 = all
    TrainConfig train{.epochs = 150, .batch_size = 32, .learning_rate = 0.1};

    void validate() const;
};

// Shallow network consuming query-correctness vectors.
struct QueryAttackConfig {
    Architecture arch{{10, 10}};
    TrainConfig train{.epochs = 60, .batch_size = 32, .learning_rate = 0.1};

    void validate() const;
};

// Posterior vector sorted descending, optionally truncated to the largest
// `feature_count` entries. The attack-model feature map.
Vec sorted_posterior_features(const Vec& probs, int feature_count);

// Binary membership classifier over attack features: lr is plain logistic
// (softmax) regression, mlp adds one hidden layer. Class 1 = member.
Classifier train_attack_model(const Mat& features, const std::vector<int>& membership_bits,
                              AttackModelKind kind, const AttackModelConfig& cfg);

// Scores every evaluation sample with the target's maximum posterior.
AttackResult attack_threshold(const TargetModel& target, const AttackDataset& ad);

// Trains an lr or mlp membership classifier on the adversary split's sorted
// posteriors, then scores the evaluation split with its member-class output.
AttackResult attack_posterior_model(const TargetModel& target, const AttackDataset& ad,
                                    AttackModelKind kind, const AttackModelConfig& cfg);

// Score 1 when the target labels the sample correctly, else 0.
AttackResult attack_gap(const TargetModel& target, const AttackDataset& ad);

// Queries each sample at rotations {0, +r, -r} degrees, trains the shallow
// network on the adversary split's correctness vectors, scores evaluation
// samples with its member-class output.
AttackResult attack_rotation(const TargetModel& target, const AttackDataset& ad, double r_deg,
                             const QueryAttackConfig& cfg);

// All integer pixel shifts (i, j) with |i| + |j| = d_px, plus the original:
// 4d + 1 queries per sample, then the same shallow-network pipeline.
AttackResult attack_translation(const TargetModel& target, const AttackDataset& ad, int d_px,
                                const QueryAttackConfig& cfg);

// Offsets queried by the translation attack, (0, 0) first.
std::vector<std::pair<int, int>> translation_offsets(int d_px);

// Score = fraction of n_queries isotropic-noise copies (pixel + 255*sigma*z,
// z standard normal, rounded and clamped) that keep the true label.
AttackResult attack_boundary(const TargetModel& target, const AttackDataset& ad, double sigma,
                             int n_queries, std::uint64_t seed);

// Picks the grid sigma with the highest adversary-split AUC; earlier grid
// entries win ties. Each sigma is evaluated with the same seed.
double calibrate_boundary_sigma(const TargetModel& target, const AttackDataset& ad,
                                const std::vector<double>& grid = {0.01, 0.02, 0.05, 0.1},
                                int n_queries = 250, std::uint64_t seed = 0);

// CSV with header sample_id,true_membership,score,attack_name,target_name.
// Doubles survive the round trip losslessly.
std::string attack_scores_csv_header();
void save_attack_results(const std::vector<AttackResult>& results, const std::string& path);
std::vector<AttackResult> load_attack_results(const std::string& path);

}  // namespace recusal
