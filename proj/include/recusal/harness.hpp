#pragma once

#include "recusal/attacks.hpp"
#include "recusal/config.hpp"
#include "recusal/metrics.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace recusal {

inline constexpr const char* kVersion = "0.1.0";

struct ReportRow {
    std::string eo_type;       // "Undefended" or the oracle tag ("ESE", ...)
    std::string dataset;       // report label from the config
    std::string manipulation;  // "0" when queries are verbatim, else "r=4" / "d=1"
    std::string attack_type;   // "Th", "LR", "MLP", "GAP", "RA", "TA", "BA"
    MetricsReport metrics;
};

struct Report {
    std::string version = kVersion;
    std::uint64_t seed = 0;
    double wall_time_seconds = 0;  // volatile; excluded from the canonical form
    std::vector<ReportRow> rows;
};

// Table-style number rendering: fractions drop the leading zero and keep at
// most four decimals (".69"); percentages keep at most two ("69.66"). Both
// strip trailing zeros, so whole numbers render bare ("100").
std::string render_fraction(double value);
std::string render_percent(double value);

std::string attack_label(AttackKind k);  // "Th", "LR", ...

enum class ReportFormat { json, csv };

// CSV columns, in order:
// eo_type,dataset,manipulation,eo_acc,test_acc,train_acc,attack_type,attack_auc,attack_adv
// eo_acc is empty for the undefended arm. JSON carries the full report.
std::string report_csv(const Report& r);
std::string report_json(const Report& r);
std::string report_canonical_json(const Report& r);  // no wall time; byte-stable per seed
void emit_report(const Report& r, const std::string& path, ReportFormat format);
Report load_report_json(const std::string& path);
Report load_report_csv(const std::string& path);  // rows only; values at csv precision

// One defense arm: the bare full model, or the ensemble behind one oracle.
struct Arm {
    std::string label;                         // row label ("Undefended", "ESE", ...)
    std::optional<DefendedEnsemble> ensemble;  // empty = undefended
    TargetModel target;
    double train_acc = 0;
    double test_acc = 0;
    std::optional<double> eo_acc;  // oracle accuracy on verbatim queries
};

// Everything an experiment builds before any attack runs. Sweeps reuse one
// context so every grid point hits the same trained models.
struct BuildContext {
    ExperimentConfig cfg;
    Dataset members;     // the ensemble's training pool
    Dataset nonmembers;  // held out; test accuracy is measured here
    Partition partition;
    Classifier full_model;
    std::vector<Classifier> subset_models;
    std::shared_ptr<const SignatureIndex> index;
    std::shared_ptr<const CBEOracle> cbe;  // only when an arm needs it
    Dataset cbe_members;                   // oracle-training split, disjoint from attacks
    Dataset cbe_nonmembers;
    AttackDataset attack_data;
    std::vector<Arm> arms;  // undefended first, then cfg.arms in order
};

// Pipeline: load or generate -> split members/non-members -> partition ->
// train subset + full models -> build signature index and cbe oracle ->
// carve adversary/evaluation splits -> audit id hygiene -> assemble arms.
// Stage failures rethrow with the stage name prefixed.
BuildContext build_context(const ExperimentConfig& cfg);

// Runs every configured attack against every arm. raw_scores, when given,
// receives the per-sample score lists behind the report rows.
Report run_attacks(const BuildContext& ctx, std::vector<AttackResult>* raw_scores = nullptr);

// build_context followed by run_attacks.
Report run_experiment(const ExperimentConfig& cfg);

enum class SweepKind { rotation, translation };
std::string to_string(SweepKind k);
SweepKind sweep_kind_from_string(const std::string& name);

// One rotation or translation attack per grid value per arm, reusing the
// context's trained models. Defended rows report the oracle's accuracy over
// the manipulated query set, so the report shows how exclusion degrades as
// the manipulation grows.
Report sweep_manipulation(const BuildContext& ctx, SweepKind kind,
                          const std::vector<double>& grid,
                          std::vector<AttackResult>* raw_scores = nullptr);
Report sweep_manipulation(const ExperimentConfig& cfg, SweepKind kind,
                          const std::vector<double>& grid);

// Oracle accuracy when every query in the manipulated set is issued once:
// members count as correct when excluded to their own subset, non-members
// when not excluded at all.
double manipulated_eo_accuracy(const DefendedEnsemble& e, const Partition& p,
                               const Dataset& members, const Dataset& nonmembers,
                               const std::function<std::vector<Image>(const Image&)>& queries);

// Artifact directory produced by the train subcommand and consumed by serve:
// manifest.json plus model, index and cbe files.
void save_context(const BuildContext& ctx, const std::string& dir);

struct ServedModel {
    ExperimentConfig cfg;
    std::vector<Arm> arms;  // targets reconstructed from disk
};
ServedModel load_served_model(const std::string& dir);

}  // namespace recusal
