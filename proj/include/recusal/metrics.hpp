#pragma once

#include "recusal/ensemble.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace recusal {

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
};

// One point per distinct score threshold (ties grouped), framed by (0,0) and
// (1,1); both coordinates are non-decreasing.
struct RocCurve {
    std::vector<RocPoint> points;
};

// `membership` holds 1 for members, 0 for non-members; both classes must be
// present. Higher scores mean "more member-like".
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& membership);

// Trapezoidal area; tie grouping makes this the Mann-Whitney statistic
// P(member score > nonmember score) + 0.5 P(tie).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& membership);

// Maximum of TPR(t) - FPR(t) over all thresholds (one-sided KS statistic).
double attack_advantage(const std::vector<double>& scores, const std::vector<int>& membership);

// The same quantity read off a curve: maximal height above the diagonal.
double advantage_from_curve(const RocCurve& c);

// accuracy(train) - accuracy(test), where `label_of` is the target's label
// output for a query.
double generalization_gap(const std::function<int(const Sample&)>& label_of,
                          const Dataset& train_set, const Dataset& test_set);

// Fraction of correct oracle outcomes: members must be excluded as their true
// subset, non-members must not be excluded.
double eo_accuracy(const std::vector<ExclusionDecision>& member_decisions,
                   const std::vector<int>& member_true_subsets,
                   const std::vector<ExclusionDecision>& nonmember_decisions);

// Convenience wrapper running the configured oracle; member true subsets come
// from the partition via sample ids (manipulated copies keep their ids).
double eo_accuracy(const DefendedEnsemble& e, const Dataset& members, const Partition& p,
                   const Dataset& nonmembers);

struct MetricsReport {
    double attack_auc = 0.5;
    double attack_advantage = 0.0;
    double model_test_acc = 0.0;
    double model_train_acc = 0.0;
    double generalization_gap = 0.0;  // always train - test
    std::optional<double> eo_accuracy;

    void validate() const;
};

// Builds a report with the gap derived from the accuracies.
MetricsReport make_metrics_report(double auc, double advantage, double train_acc, double test_acc,
                                  std::optional<double> eo_acc);

std::string metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const std::string& text);

// Paper-style table columns.
std::string metrics_csv_header();  // eo_acc,test_acc,train_acc,attack_auc,attack_adv
std::string metrics_csv_row(const MetricsReport& r);

}  // namespace recusal
