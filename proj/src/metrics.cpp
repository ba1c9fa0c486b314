#include "recusal/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace recusal {

namespace {

struct ScoreSplit {
    std::vector<std::size_t> order;  // indices sorted by descending score
    long members = 0;
    long nonmembers = 0;
};

ScoreSplit checked_split(const std::vector<double>& scores, const std::vector<int>& membership) {
    if (scores.size() != membership.size())
        throw ValidationError("scores and membership bits must pair up");
    if (scores.empty()) throw ValidationError("no scores given");
    ScoreSplit s;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw ValidationError("score is NaN");
        if (membership[i] == 1)
            ++s.members;
        else if (membership[i] == 0)
            ++s.nonmembers;
        else
            throw ValidationError("membership bits must be 0 or 1");
    }
    if (s.members == 0 || s.nonmembers == 0)
        throw MetricError("metric undefined: needs both members and non-members");
    s.order.resize(scores.size());
    std::iota(s.order.begin(), s.order.end(), std::size_t{0});
    std::stable_sort(s.order.begin(), s.order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return s;
}

}  // namespace

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& membership) {
    const ScoreSplit s = checked_split(scores, membership);

    RocCurve c;
    c.points.push_back({0.0, 0.0});
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < s.order.size()) {
        // group samples sharing one score into a single threshold step
        std::size_t j = i;
        while (j < s.order.size() && scores[s.order[j]] == scores[s.order[i]]) {
            if (membership[s.order[j]] == 1)
                ++tp;
            else
                ++fp;
            ++j;
        }
        c.points.push_back({static_cast<double>(fp) / static_cast<double>(s.nonmembers),
                            static_cast<double>(tp) / static_cast<double>(s.members)});
        i = j;
    }
    return c;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& membership) {
    const RocCurve c = roc_curve(scores, membership);
    double area = 0;
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i)
        area += (c.points[i + 1].fpr - c.points[i].fpr) *
                (c.points[i].tpr + c.points[i + 1].tpr) / 2.0;
    return area;
}

double attack_advantage(const std::vector<double>& scores, const std::vector<int>& membership) {
    return advantage_from_curve(roc_curve(scores, membership));
}

double advantage_from_curve(const RocCurve& c) {
    if (c.points.empty()) throw ValidationError("empty roc curve");
    double best = 0;
    for (const RocPoint& p : c.points) best = std::max(best, p.tpr - p.fpr);
    return best;
}

double generalization_gap(const std::function<int(const Sample&)>& label_of,
                          const Dataset& train_set, const Dataset& test_set) {
    if (train_set.empty() || test_set.empty())
        throw ValidationError("generalization gap needs nonempty train and test sets");
    auto acc = [&](const Dataset& d) {
        long hits = 0;
        for (const Sample& s : d.samples)
            if (label_of(s) == s.label) ++hits;
        return static_cast<double>(hits) / static_cast<double>(d.size());
    };
    return acc(train_set) - acc(test_set);
}

double eo_accuracy(const std::vector<ExclusionDecision>& member_decisions,
                   const std::vector<int>& member_true_subsets,
                   const std::vector<ExclusionDecision>& nonmember_decisions) {
    if (member_decisions.size() != member_true_subsets.size())
        throw ValidationError("member decisions and true subsets must pair up");
    const std::size_t total = member_decisions.size() + nonmember_decisions.size();
    if (total == 0) throw MetricError("metric undefined: no oracle decisions");

    long correct = 0;
    for (std::size_t i = 0; i < member_decisions.size(); ++i)
        if (member_decisions[i].excluded &&
            *member_decisions[i].excluded == member_true_subsets[i])
            ++correct;
    for (const ExclusionDecision& d : nonmember_decisions)
        if (!d.excluded) ++correct;
    return static_cast<double>(correct) / static_cast<double>(total);
}

double eo_accuracy(const DefendedEnsemble& e, const Dataset& members, const Partition& p,
                   const Dataset& nonmembers) {
    std::vector<ExclusionDecision> md, nd;
    std::vector<int> subsets;
    md.reserve(members.size());
    subsets.reserve(members.size());
    for (const Sample& s : members.samples) {
        const int sub = p.subset_of(s.id);
        if (sub < 0) throw ValidationError("member id not found in the partition");
        md.push_back(oracle_decide(e, s));
        subsets.push_back(sub);
    }
    nd.reserve(nonmembers.size());
    for (const Sample& s : nonmembers.samples) nd.push_back(oracle_decide(e, s));
    return eo_accuracy(md, subsets, nd);
}

void MetricsReport::validate() const {
    if (std::isnan(attack_auc) || attack_auc < 0 || attack_auc > 1)
        throw ValidationError("attack_auc outside [0, 1]");
    if (std::isnan(attack_advantage) || attack_advantage < -1 || attack_advantage > 1)
        throw ValidationError("attack_advantage outside [-1, 1]");
    for (double a : {model_test_acc, model_train_acc})
        if (std::isnan(a) || a < 0 || a > 1) throw ValidationError("accuracy outside [0, 1]");
    if (generalization_gap != model_train_acc - model_test_acc)
        throw ValidationError("generalization_gap must equal train minus test accuracy");
    if (eo_accuracy && (std::isnan(*eo_accuracy) || *eo_accuracy < 0 || *eo_accuracy > 1))
        throw ValidationError("eo_accuracy outside [0, 1]");
}

MetricsReport make_metrics_report(double auc, double advantage, double train_acc, double test_acc,
                                  std::optional<double> eo_acc) {
    MetricsReport r;
    r.attack_auc = auc;
    r.attack_advantage = advantage;
    r.model_train_acc = train_acc;
    r.model_test_acc = test_acc;
    r.generalization_gap = train_acc - test_acc;
    r.eo_accuracy = eo_acc;
    r.validate();
    return r;
}

std::string metrics_to_json(const MetricsReport& r) {
    r.validate();
    nlohmann::ordered_json j;
    j["attack_auc"] = r.attack_auc;
    j["attack_advantage"] = r.attack_advantage;
    j["model_test_acc"] = r.model_test_acc;
    j["model_train_acc"] = r.model_train_acc;
    j["generalization_gap"] = r.generalization_gap;
    if (r.eo_accuracy)
        j["eo_accuracy"] = *r.eo_accuracy;
    else
        j["eo_accuracy"] = nullptr;
    return j.dump(2);
}

MetricsReport metrics_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        MetricsReport r;
        r.attack_auc = j.at("attack_auc").get<double>();
        r.attack_advantage = j.at("attack_advantage").get<double>();
        r.model_test_acc = j.at("model_test_acc").get<double>();
        r.model_train_acc = j.at("model_train_acc").get<double>();
        r.generalization_gap = j.at("generalization_gap").get<double>();
        if (!j.at("eo_accuracy").is_null()) r.eo_accuracy = j.at("eo_accuracy").get<double>();
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("metrics report: ") + e.what());
    }
}

namespace {

std::string full_precision(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string metrics_csv_header() { return "eo_acc,test_acc,train_acc,attack_auc,attack_adv"; }

std::string metrics_csv_row(const MetricsReport& r) {
    r.validate();
    std::string row = r.eo_accuracy ? full_precision(*r.eo_accuracy) : std::string{};
    row += ',';
    row += full_precision(r.model_test_acc);
    row += ',';
    row += full_precision(r.model_train_acc);
    row += ',';
    row += full_precision(r.attack_auc);
    row += ',';
    row += full_precision(r.attack_advantage);
    return row;
}

}  // namespace recusal
