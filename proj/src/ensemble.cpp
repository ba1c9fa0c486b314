#include "recusal/ensemble.hpp"

#include <algorithm>
#include <cmath>

namespace recusal {

std::string to_string(OutputMode m) {
    switch (m) {
        case OutputMode::label_only: return "label_only";
        case OutputMode::label_and_probs: return "label_and_probs";
    }
    throw ValidationError("unknown output mode");
}

OutputMode output_mode_from_string(const std::string& name) {
    if (name == "label_only") return OutputMode::label_only;
    if (name == "label_and_probs") return OutputMode::label_and_probs;
    throw ValidationError("unknown output mode: " + name);
}

void DefendedEnsemble::validate() const {
    if (models.size() < 2) throw ValidationError("ensemble needs at least 2 models");
    for (const Classifier& c : models) {
        if (c.input_dim != models[0].input_dim || c.num_classes != models[0].num_classes)
            throw ValidationError("ensemble models disagree on dimensions");
        if (c.num_classes < 2) throw ValidationError("ensemble models must be trained");
    }
    oracle.validate();
    const int n = size();
    const bool needs_index = oracle.kind == OracleKind::ese || oracle.kind == OracleKind::ase ||
                             oracle.kind == OracleKind::coe;
    const bool needs_cbe = oracle.kind == OracleKind::cbe || oracle.kind == OracleKind::coe;
    if (needs_index) {
        if (!index) throw ValidationError("oracle kind requires a signature index");
        if (index->subsets() != n)
            throw ValidationError("signature index subsets do not match the ensemble size");
    }
    if (needs_cbe) {
        if (!cbe) throw ValidationError("oracle kind requires a trained cbe state");
        if (cbe->feature_model.num_classes != n)
            throw ValidationError("cbe feature model does not match the ensemble size");
    }
}

int majority_vote(const std::vector<int>& votes, const std::vector<Vec>& probs) {
    if (votes.empty()) throw ValidationError("majority vote over an empty ensemble");
    if (votes.size() != probs.size())
        throw ValidationError("votes and probability vectors must pair up");
    const int k = static_cast<int>(probs[0].size());
    for (const Vec& p : probs)
        if (static_cast<int>(p.size()) != k)
            throw ValidationError("probability vectors disagree on class count");
    for (int v : votes)
        if (v < 0 || v >= k) throw ValidationError("vote outside the class range");

    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (int v : votes) ++count[static_cast<std::size_t>(v)];
    std::vector<double> summed(static_cast<std::size_t>(k), 0.0);
    for (const Vec& p : probs)
        for (int c = 0; c < k; ++c) summed[static_cast<std::size_t>(c)] += p(c);

    int best = 0;
    for (int c = 1; c < k; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const auto cb = static_cast<std::size_t>(best);
        if (count[cc] > count[cb] || (count[cc] == count[cb] && summed[cc] > summed[cb]))
            best = c;
    }
    return best;
}

namespace {

int argmax_first(const Vec& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

ExclusionDecision decide_with_probs(const DefendedEnsemble& e, const Sample& x,
                                    const std::vector<Vec>& probs) {
    switch (e.oracle.kind) {
        case OracleKind::none: return {};
        case OracleKind::mce: return mce_from_probs(probs);
        case OracleKind::ese: return ese_decide(*e.index, x);
        case OracleKind::ase: return ase_decide(*e.index, x, e.oracle.tau_h);
        case OracleKind::cbe: return cbe_decide(*e.cbe, x);
        case OracleKind::coe: return coe_decide(*e.index, *e.cbe, x, e.oracle.tau_h);
    }
    throw ValidationError("unknown oracle kind");
}

}  // namespace

ExclusionDecision oracle_decide(const DefendedEnsemble& e, const Sample& x) {
    e.validate();
    std::vector<Vec> probs;
    if (e.oracle.kind == OracleKind::mce) {
        probs.reserve(e.models.size());
        for (const Classifier& c : e.models) probs.push_back(predict_proba(c, x));
    }
    return decide_with_probs(e, x, probs);
}

PredictionResponse defended_predict(const DefendedEnsemble& e, const Sample& x) {
    e.validate();
    const int n = e.size();
    std::vector<Vec> probs;
    probs.reserve(e.models.size());
    for (const Classifier& c : e.models) probs.push_back(predict_proba(c, x));

    const ExclusionDecision d = decide_with_probs(e, x, probs);
    if (d.excluded && (*d.excluded < 0 || *d.excluded >= n))
        throw ValidationError("oracle excluded a subset outside the ensemble");

    std::vector<int> votes;
    std::vector<Vec> part;
    votes.reserve(probs.size());
    part.reserve(probs.size());
    for (int i = 0; i < n; ++i) {
        if (d.excluded && *d.excluded == i) continue;
        part.push_back(probs[static_cast<std::size_t>(i)]);
        votes.push_back(argmax_first(part.back()));
    }

    PredictionResponse r;
    r.label = majority_vote(votes, part);
    r.excluded = d.excluded;
    r.source = d.source;
    r.participating = static_cast<int>(part.size());
    if (e.output_mode == OutputMode::label_and_probs) {
        Vec mean = Vec::Zero(part[0].size());
        for (const Vec& p : part) mean += p;
        mean /= mean.sum();
        r.probs = std::move(mean);
    }
    return r;
}

PredictionResponse undefended_predict(const Classifier& full_model, const Sample& x,
                                      OutputMode mode) {
    PredictionResponse r;
    Vec probs = predict_proba(full_model, x);
    r.label = argmax_first(probs);
    r.participating = 1;
    if (mode == OutputMode::label_and_probs) r.probs = std::move(probs);
    return r;
}

}  // namespace recusal
