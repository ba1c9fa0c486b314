#pragma once

#include "recusal/attacks.hpp"
#include "recusal/dataset.hpp"
#include "recusal/ensemble.hpp"
#include "recusal/learner.hpp"
#include "recusal/oracle.hpp"
#include "recusal/signature.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace recusal {

// Flat INI text: [section] headers, key = value lines, # or ; comments.
// Duplicate keys and keys outside a section are parse errors.
using IniData = std::map<std::string, std::map<std::string, std::string>>;
IniData parse_ini(const std::string& text);

enum class AttackKind { threshold, lr, mlp, gap, rotation, translation, boundary };
std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& name);
bool attack_needs_probabilities(AttackKind k);  // threshold, lr and mlp do

std::string to_string(LookupMode m);
LookupMode lookup_mode_from_string(const std::string& name);

struct SyntheticSpec {
    int classes = 4;
    int per_class = 250;
    Shape shape{16, 16, 3};
    double separation = 2.0;
};

struct DatasetConfig {
    std::string source = "synthetic";  // "synthetic" or a file path
    std::string name = "synthetic";    // label used in reports
    FileFormat format = FileFormat::csv;
    SyntheticSpec synthetic;
    double member_fraction = 0.5;  // pool share that becomes training members
};

struct AttackSuiteConfig {
    std::vector<AttackKind> run{AttackKind::threshold, AttackKind::lr, AttackKind::mlp,
                                AttackKind::gap};
    double adversary_fraction = 0.2;
    double rotation_deg = 4.0;
    int translation_px = 1;
    double boundary_sigma = 0.05;  // 0 = calibrate on the adversary split
    int boundary_queries = 250;
    AttackModelConfig model;  // lr / mlp attack settings
    QueryAttackConfig query;  // rotation / translation net settings
};

struct ExperimentConfig {
    DatasetConfig dataset;
    int subsets = 4;
    OutputMode output_mode = OutputMode::label_and_probs;
    std::vector<OracleKind> arms{OracleKind::ese};  // the undefended arm always runs
    double tau_h = 10.0 / 64.0;
    LookupMode lookup = LookupMode::hash_table;
    Architecture arch;  // subset and full models
    TrainConfig train;
    // Subset-model training augmentation, recovering accuracy lost to the
    // partition; the full baseline model always trains on raw members.
    AugmentParams augment;
    int augment_copies = 0;  // augmented copies appended per subset training sample
    CBEConfig cbe;           // cbe.member_fraction = per-subset share carved for the oracle
    double cbe_nonmember_fraction = 0.25;
    AttackSuiteConfig attacks;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    void validate() const;
};

// Strict loader: every key must be known, every value well-formed. Errors
// name the offending section.key.
ExperimentConfig experiment_config_from_ini(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical echo of every setting; parses back to an equal config.
std::string experiment_config_to_ini(const ExperimentConfig& cfg);

}  // namespace recusal
