#include "recusal/attacks.hpp"

#include "recusal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <unordered_set>

namespace recusal {

namespace {

void check_name(const std::string& name, const char* what) {
    if (name.empty()) throw ValidationError(std::string(what) + " must not be empty");
    if (name.find_first_of(",\n\r") != std::string::npos)
        throw ValidationError(std::string(what) + " must not contain commas or line breaks");
}

void require_probabilities(const TargetModel& t, const char* attack) {
    if (t.output_mode != OutputMode::label_and_probs)
        throw AttackError(std::string(attack) + " attack is inapplicable to a label-only target");
}

Vec probs_of(const TargetModel& t, const Sample& s) {
    const PredictionResponse r = t.predict(s);
    if (!r.probs) throw AttackError("target response carries no probabilities");
    return *r.probs;
}

// Scores the evaluation split in its canonical order: members, then
// non-members. Stateful scorers (noise draws) rely on this order.
AttackResult score_eval(const TargetModel& t, const AttackDataset& ad, std::string name,
                        const std::function<double(const Sample&)>& score) {
    AttackResult r;
    r.attack_name = std::move(name);
    r.target_name = t.name;
    r.scores.reserve(ad.eval_members.size() + ad.eval_nonmembers.size());
    for (const Sample& s : ad.eval_members.samples) r.scores.push_back({s.id, 1, score(s)});
    for (const Sample& s : ad.eval_nonmembers.samples) r.scores.push_back({s.id, 0, score(s)});
    r.validate();
    return r;
}

void require_adversary(const AttackDataset& ad) {
    if (ad.adversary_members.empty() || ad.adversary_nonmembers.empty())
        throw TrainingError("attack training needs adversary members and non-members");
}

// Adversary-split design matrix in canonical order (members then
// non-members) with the matching membership bits.
std::pair<Mat, std::vector<int>> adversary_features(
    const AttackDataset& ad, const std::function<Vec(const Sample&)>& features) {
    const Eigen::Index rows =
        static_cast<Eigen::Index>(ad.adversary_members.size() + ad.adversary_nonmembers.size());
    Mat f;
    std::vector<int> bits;
    bits.reserve(static_cast<std::size_t>(rows));
    Eigen::Index row = 0;
    for (const Dataset* d : {&ad.adversary_members, &ad.adversary_nonmembers}) {
        for (const Sample& s : d->samples) {
            const Vec v = features(s);
            if (f.size() == 0) f.resize(rows, v.size());
            if (v.size() != f.cols())
                throw ValidationError("attack feature dimension changed between samples");
            f.row(row++) = v.transpose();
            bits.push_back(d == &ad.adversary_members ? 1 : 0);
        }
    }
    return {std::move(f), std::move(bits)};
}

// Shared pipeline of the query-manipulation attacks: correctness vectors
// over a fixed query set feed a shallow membership network.
AttackResult query_pattern_attack(const TargetModel& t, const AttackDataset& ad,
                                  const std::function<std::vector<Image>(const Image&)>& queries,
                                  const QueryAttackConfig& cfg, std::string name) {
    t.validate();
    ad.validate();
    cfg.validate();
    require_adversary(ad);

    auto features = [&](const Sample& s) {
        const std::vector<Image> q = queries(s.image);
        Vec v(static_cast<Eigen::Index>(q.size()));
        for (std::size_t i = 0; i < q.size(); ++i)
            v(static_cast<Eigen::Index>(i)) =
                t.predict(Sample{q[i], s.label, s.id}).label == s.label ? 1.0 : 0.0;
        return v;
    };

    auto [f, bits] = adversary_features(ad, features);
    const Classifier net = train_classifier(f, bits, 2, cfg.arch, cfg.train);
    return score_eval(t, ad, std::move(name),
                      [&](const Sample& s) { return predict_proba(net, features(s))(1); });
}

Image noisy_copy(const Image& img, double sigma, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Image out = img;
    for (auto& p : out.pixels) {
        const long v = std::lround(static_cast<double>(p) + 255.0 * sigma * z(rng));
        p = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
    return out;
}

double boundary_score(const TargetModel& t, const Sample& s, double sigma, int n_queries,
                      Rng& rng) {
    int correct = 0;
    for (int q = 0; q < n_queries; ++q)
        if (t.predict(Sample{noisy_copy(s.image, sigma, rng), s.label, s.id}).label == s.label)
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(n_queries);
}

std::string full_precision(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void TargetModel::validate() const {
    check_name(name, "target name");
    if (num_classes < 2) throw ValidationError("target must distinguish at least two classes");
    if (!predict) throw ValidationError("target has no query function");
}

TargetModel make_target(const DefendedEnsemble& e, std::string name) {
    e.validate();
    auto owned = std::make_shared<const DefendedEnsemble>(e);
    TargetModel t;
    t.name = std::move(name);
    t.output_mode = e.output_mode;
    t.num_classes = owned->models.front().num_classes;
    t.predict = [owned](const Sample& s) { return defended_predict(*owned, s); };
    t.validate();
    return t;
}

TargetModel make_target(const Classifier& model, OutputMode mode, std::string name) {
    if (model.num_classes < 2 || model.w.empty())
        throw ValidationError("target classifier is not trained");
    auto owned = std::make_shared<const Classifier>(model);
    TargetModel t;
    t.name = std::move(name);
    t.output_mode = mode;
    t.num_classes = model.num_classes;
    t.predict = [owned, mode](const Sample& s) { return undefended_predict(*owned, s, mode); };
    t.validate();
    return t;
}

void AttackDataset::validate() const {
    if (eval_members.empty() || eval_nonmembers.empty())
        throw ValidationError("evaluation split must not be empty");
    if (eval_members.size() != eval_nonmembers.size())
        throw ValidationError("evaluation split must balance members and non-members");
    std::unordered_set<std::uint64_t> seen;
    for (const Dataset* d : {&adversary_members, &adversary_nonmembers, &eval_members,
                             &eval_nonmembers}) {
        for (const Sample& s : d->samples)
            if (!seen.insert(s.id).second)
                throw ValidationError("attack splits share sample id " + std::to_string(s.id));
    }
}

AttackDataset split_attack_dataset(const Dataset& members, const Dataset& nonmembers,
                                   double adversary_fraction, std::uint64_t seed) {
    if (!(adversary_fraction > 0.0) || !(adversary_fraction < 1.0))
        throw ValidationError("adversary fraction must lie strictly between 0 and 1");
    AttackDataset ad;
    std::tie(ad.adversary_members, ad.eval_members) =
        split_stratified(members, adversary_fraction, seed);
    std::tie(ad.adversary_nonmembers, ad.eval_nonmembers) =
        split_stratified(nonmembers, adversary_fraction, seed + 1);
    const std::size_t balanced = std::min(ad.eval_members.size(), ad.eval_nonmembers.size());
    ad.eval_members.samples.resize(balanced);
    ad.eval_nonmembers.samples.resize(balanced);
    ad.validate();
    return ad;
}

std::vector<double> AttackResult::score_values() const {
    std::vector<double> v;
    v.reserve(scores.size());
    for (const AttackScore& s : scores) v.push_back(s.score);
    return v;
}

std::vector<int> AttackResult::membership_bits() const {
    std::vector<int> v;
    v.reserve(scores.size());
    for (const AttackScore& s : scores) v.push_back(s.true_membership);
    return v;
}

void AttackResult::validate() const {
    check_name(attack_name, "attack name");
    check_name(target_name, "target name");
    for (const AttackScore& s : scores) {
        if (!std::isfinite(s.score)) throw ValidationError("attack scores must be finite");
        if (s.true_membership != 0 && s.true_membership != 1)
            throw ValidationError("membership bits must be 0 or 1");
    }
}

double result_auc(const AttackResult& r) { return roc_auc(r.score_values(), r.membership_bits()); }

double result_advantage(const AttackResult& r) {
    return attack_advantage(r.score_values(), r.membership_bits());
}

std::string to_string(AttackModelKind k) {
    switch (k) {
        case AttackModelKind::lr: return "lr";
        case AttackModelKind::mlp: return "mlp";
    }
    throw ValidationError("unknown attack model kind");
}

void AttackModelConfig::validate() const {
    if (mlp_hidden < 1) throw ValidationError("mlp attack needs at least one hidden unit");
    if (feature_count < 0) throw ValidationError("feature count must not be negative");
    train.validate();
}

void QueryAttackConfig::validate() const {
    arch.validate();
    train.validate();
}

Vec sorted_posterior_features(const Vec& probs, int feature_count) {
    if (probs.size() == 0) throw ValidationError("empty posterior vector");
    if (feature_count < 0) throw ValidationError("feature count must not be negative");
    std::vector<double> v(probs.data(), probs.data() + probs.size());
    std::sort(v.begin(), v.end(), std::greater<>());
    const std::size_t keep = feature_count > 0
                                 ? std::min<std::size_t>(static_cast<std::size_t>(feature_count),
                                                         v.size())
                                 : v.size();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(keep));
}

Classifier train_attack_model(const Mat& features, const std::vector<int>& membership_bits,
                              AttackModelKind kind, const AttackModelConfig& cfg) {
    cfg.validate();
    if (features.rows() != static_cast<Eigen::Index>(membership_bits.size()))
        throw ValidationError("features and membership bits must pair up");
    long members = 0, nonmembers = 0;
    for (int bit : membership_bits) {
        if (bit == 1)
            ++members;
        else if (bit == 0)
            ++nonmembers;
        else
            throw ValidationError("membership bits must be 0 or 1");
    }
    if (members == 0 || nonmembers == 0)
        throw TrainingError("attack model training needs both classes");
    const Architecture arch =
        kind == AttackModelKind::lr ? Architecture{} : Architecture{{cfg.mlp_hidden}};
    return train_classifier(features, membership_bits, 2, arch, cfg.train);
}

AttackResult attack_threshold(const TargetModel& target, const AttackDataset& ad) {
    target.validate();
    ad.validate();
    require_probabilities(target, "threshold");
    return score_eval(target, ad, "threshold",
                      [&](const Sample& s) { return probs_of(target, s).maxCoeff(); });
}

AttackResult attack_posterior_model(const TargetModel& target, const AttackDataset& ad,
                                    AttackModelKind kind, const AttackModelConfig& cfg) {
    target.validate();
    ad.validate();
    cfg.validate();
    require_probabilities(target, to_string(kind).c_str());
    require_adversary(ad);

    auto features = [&](const Sample& s) {
        return sorted_posterior_features(probs_of(target, s), cfg.feature_count);
    };
    auto [f, bits] = adversary_features(ad, features);
    const Classifier model = train_attack_model(f, bits, kind, cfg);
    return score_eval(target, ad, to_string(kind),
                      [&](const Sample& s) { return predict_proba(model, features(s))(1); });
}

AttackResult attack_gap(const TargetModel& target, const AttackDataset& ad) {
    target.validate();
    ad.validate();
    return score_eval(target, ad, "gap", [&](const Sample& s) {
        return target.predict(s).label == s.label ? 1.0 : 0.0;
    });
}

AttackResult attack_rotation(const TargetModel& target, const AttackDataset& ad, double r_deg,
                             const QueryAttackConfig& cfg) {
    if (!(r_deg > 0.0)) throw ValidationError("rotation angle must be positive");
    return query_pattern_attack(
        target, ad,
        [r_deg](const Image& img) {
            return std::vector<Image>{img, rotate_bilinear(img, r_deg),
                                      rotate_bilinear(img, -r_deg)};
        },
        cfg, "rotation");
}

std::vector<std::pair<int, int>> translation_offsets(int d_px) {
    if (d_px < 1) throw ValidationError("translation bound must be at least one pixel");
    std::vector<std::pair<int, int>> offsets{{0, 0}};
    for (int i = -d_px; i <= d_px; ++i) {
        const int j = d_px - std::abs(i);
        if (j == 0) {
            offsets.emplace_back(i, 0);
        } else {
            offsets.emplace_back(i, -j);
            offsets.emplace_back(i, j);
        }
    }
    return offsets;
}

AttackResult attack_translation(const TargetModel& target, const AttackDataset& ad, int d_px,
                                const QueryAttackConfig& cfg) {
    const auto offsets = translation_offsets(d_px);
    return query_pattern_attack(
        target, ad,
        [&offsets](const Image& img) {
            std::vector<Image> q;
            q.reserve(offsets.size());
            for (const auto& [dh, dw] : offsets) q.push_back(translate_edge(img, dh, dw));
            return q;
        },
        cfg, "translation");
}

AttackResult attack_boundary(const TargetModel& target, const AttackDataset& ad, double sigma,
                             int n_queries, std::uint64_t seed) {
    target.validate();
    ad.validate();
    if (!(sigma > 0.0)) throw ValidationError("noise intensity must be positive");
    if (n_queries < 1) throw ValidationError("boundary attack needs at least one query");
    Rng rng(seed);
    return score_eval(target, ad, "boundary", [&](const Sample& s) {
        return boundary_score(target, s, sigma, n_queries, rng);
    });
}

double calibrate_boundary_sigma(const TargetModel& target, const AttackDataset& ad,
                                const std::vector<double>& grid, int n_queries,
                                std::uint64_t seed) {
    target.validate();
    ad.validate();
    require_adversary(ad);
    if (grid.empty()) throw ValidationError("sigma grid must not be empty");
    if (n_queries < 1) throw ValidationError("boundary attack needs at least one query");

    double best_sigma = 0, best_auc = -1;
    for (double sigma : grid) {
        if (!(sigma > 0.0)) throw ValidationError("noise intensity must be positive");
        Rng rng(seed);
        std::vector<double> scores;
        std::vector<int> bits;
        for (const Dataset* d : {&ad.adversary_members, &ad.adversary_nonmembers}) {
            for (const Sample& s : d->samples) {
                scores.push_back(boundary_score(target, s, sigma, n_queries, rng));
                bits.push_back(d == &ad.adversary_members ? 1 : 0);
            }
        }
        const double auc = roc_auc(scores, bits);
        if (auc > best_auc) {
            best_auc = auc;
            best_sigma = sigma;
        }
    }
    return best_sigma;
}

std::string attack_scores_csv_header() {
    return "sample_id,true_membership,score,attack_name,target_name";
}

void save_attack_results(const std::vector<AttackResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << attack_scores_csv_header() << '\n';
    for (const AttackResult& r : results) {
        r.validate();
        for (const AttackScore& s : r.scores)
            out << s.sample_id << ',' << s.true_membership << ',' << full_precision(s.score)
                << ',' << r.attack_name << ',' << r.target_name << '\n';
    }
    if (!out.flush()) throw IoError("failed writing " + path);
}

std::vector<AttackResult> load_attack_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != attack_scores_csv_header())
        throw ParseError(path + ": unexpected csv header");

    std::vector<AttackResult> results;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 5) throw ParseError(path + ": malformed row '" + line + "'");

        AttackScore s;
        try {
            s.sample_id = std::stoull(fields[0]);
            s.true_membership = std::stoi(fields[1]);
            s.score = std::stod(fields[2]);
        } catch (const std::exception&) {
            throw ParseError(path + ": malformed row '" + line + "'");
        }
        auto it = std::find_if(results.begin(), results.end(), [&](const AttackResult& r) {
            return r.attack_name == fields[3] && r.target_name == fields[4];
        });
        if (it == results.end()) {
            results.push_back({fields[3], fields[4], {}});
            it = std::prev(results.end());
        }
        it->scores.push_back(s);
    }
    for (const AttackResult& r : results) r.validate();
    return results;
}

}  // namespace recusal
