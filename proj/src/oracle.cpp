#include "recusal/oracle.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json_io.hpp"
#include "recusal/ensemble.hpp"

namespace recusal {

std::string to_string(DecisionSource s) {
    switch (s) {
        case DecisionSource::none: return "none";
        case DecisionSource::mce: return "mce";
        case DecisionSource::ese: return "ese";
        case DecisionSource::ase: return "ase";
        case DecisionSource::cbe: return "cbe";
    }
    throw ValidationError("unknown decision source");
}

std::string to_string(OracleKind k) {
    switch (k) {
        case OracleKind::none: return "none";
        case OracleKind::mce: return "mce";
        case OracleKind::ese: return "ese";
        case OracleKind::ase: return "ase";
        case OracleKind::cbe: return "cbe";
        case OracleKind::coe: return "coe";
    }
    throw ValidationError("unknown oracle kind");
}

OracleKind oracle_kind_from_string(const std::string& name) {
    if (name == "none") return OracleKind::none;
    if (name == "mce") return OracleKind::mce;
    if (name == "ese") return OracleKind::ese;
    if (name == "ase") return OracleKind::ase;
    if (name == "cbe") return OracleKind::cbe;
    if (name == "coe") return OracleKind::coe;
    throw ValidationError("unknown oracle kind: " + name);
}

void CBEConfig::validate() const {
    if (components < 0) throw ValidationError("components must be >= 0");
    if (!(member_fraction > 0) || member_fraction > 1)
        throw ValidationError("member_fraction must be in (0, 1]");
    arch.validate();
    train.validate();
}

void OracleConfig::validate() const {
    if (std::isnan(tau_h) || tau_h < 0 || tau_h > 1)
        throw ValidationError("tau_h must be in [0, 1]");
    if (cbe) cbe->validate();
}

namespace {

int argmax_first(const Vec& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

}  // namespace

PCAModel fit_pca(const Mat& x, int m) {
    if (x.rows() < 1 || x.cols() < 1) throw ValidationError("pca needs a nonempty matrix");
    if (m < 1 || m > x.cols())
        throw ValidationError("pca component count must be in [1, input_dim]");

    PCAModel p;
    p.mean = x.colwise().mean();
    Mat centered = x.rowwise() - p.mean.transpose();
    const Mat cov = centered.transpose() * centered / static_cast<double>(x.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    if (es.info() != Eigen::Success) throw TrainingError("pca eigendecomposition failed");

    const Eigen::Index d = cov.rows();
    p.eigenvalues = Vec(d);
    for (Eigen::Index j = 0; j < d; ++j) p.eigenvalues(j) = es.eigenvalues()(d - 1 - j);
    p.components = Mat(m, d);
    for (int j = 0; j < m; ++j) p.components.row(j) = es.eigenvectors().col(d - 1 - j).transpose();
    return p;
}

Vec pca_project(const PCAModel& p, const Vec& x) {
    if (x.size() != p.mean.size())
        throw ValidationError("pca projection dimension mismatch: got " +
                              std::to_string(x.size()) + ", expected " +
                              std::to_string(p.mean.size()));
    return p.components * (x - p.mean);
}

namespace {

// Feature row from the parts, usable before the feature model exists.
Vec feature_row(const PCAModel& pca, const Classifier& reference, const Sample& x) {
    const Vec pixels = flatten_scaled(x.image);
    const Vec proj = pca_project(pca, pixels);
    const Vec probs = predict_proba(reference, pixels);
    Vec f(proj.size() + probs.size() + 1);
    f << proj, probs, static_cast<double>(argmax_first(probs));
    return f;
}

}  // namespace

Vec cbe_features(const CBEOracle& cbe, const Sample& x) {
    return feature_row(cbe.pca, cbe.reference_model, x);
}

double calibrate_tau_eo(const Mat& member_posteriors, const std::vector<int>& member_subsets,
                        const Mat& nonmember_posteriors) {
    if (member_posteriors.rows() < 1 || nonmember_posteriors.rows() < 1)
        throw ValidationError("calibration needs nonempty member and nonmember sets");
    if (member_posteriors.cols() != nonmember_posteriors.cols())
        throw ValidationError("calibration posterior widths differ");
    if (static_cast<Eigen::Index>(member_subsets.size()) != member_posteriors.rows())
        throw ValidationError("member subset labels must match posterior rows");
    const int n = static_cast<int>(member_posteriors.cols());
    for (int s : member_subsets)
        if (s < 0 || s >= n) throw ValidationError("member subset index out of range");

    double best_t = 0.0;
    long best_correct = -1;
    for (int j = 0; j <= 20; ++j) {
        const double t = j / 20.0;
        long correct = 0;
        for (Eigen::Index i = 0; i < member_posteriors.rows(); ++i) {
            const Vec row = member_posteriors.row(i);
            const int a = argmax_first(row);
            if (row(a) >= t && a == member_subsets[static_cast<std::size_t>(i)]) ++correct;
        }
        for (Eigen::Index i = 0; i < nonmember_posteriors.rows(); ++i) {
            const Vec row = nonmember_posteriors.row(i);
            if (row(argmax_first(row)) < t) ++correct;
        }
        if (correct > best_correct) {
            best_correct = correct;
            best_t = t;
        }
    }
    return best_t;
}

double calibrate_tau_eo(const CBEOracle& cbe, const Dataset& members, const Partition& p,
                        const Dataset& nonmembers) {
    if (members.empty() || nonmembers.empty())
        throw ValidationError("calibration needs nonempty member and nonmember sets");
    Mat mp(static_cast<Eigen::Index>(members.size()), cbe.feature_model.num_classes);
    std::vector<int> subsets(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
        const Sample& s = members.samples[i];
        const int sub = p.subset_of(s.id);
        if (sub < 0) throw ValidationError("calibration member not found in the partition");
        subsets[i] = sub;
        mp.row(static_cast<Eigen::Index>(i)) =
            predict_proba(cbe.feature_model, cbe_features(cbe, s)).transpose();
    }
    Mat np(static_cast<Eigen::Index>(nonmembers.size()), cbe.feature_model.num_classes);
    for (std::size_t i = 0; i < nonmembers.size(); ++i)
        np.row(static_cast<Eigen::Index>(i)) =
            predict_proba(cbe.feature_model, cbe_features(cbe, nonmembers.samples[i])).transpose();
    return calibrate_tau_eo(mp, subsets, np);
}

CBEOracle train_cbe(const Partition& p, const Dataset& nonmembers,
                    const Classifier& reference_model, const CBEConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(p.subsets.size());
    if (n < 2) throw ValidationError("partition must have at least 2 subsets");
    for (int i = 0; i < n; ++i)
        if (p.subsets[static_cast<std::size_t>(i)].empty())
            throw TrainingError("subset " + std::to_string(i) + " contributes no samples");
    if (nonmembers.empty()) throw ValidationError("nonmembers must be nonempty");
    for (const Sample& s : nonmembers.samples)
        if (p.subset_of(s.id) >= 0)
            throw ValidationError("nonmember id " + std::to_string(s.id) +
                                  " also appears in the partition");

    // Deterministic per-subset member subsample; every subset contributes.
    Rng rng(cfg.seed);
    std::vector<const Sample*> members;
    std::vector<int> targets;
    for (int i = 0; i < n; ++i) {
        const auto& subset = p.subsets[static_cast<std::size_t>(i)].samples;
        std::vector<std::size_t> order(subset.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        const auto want = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::llround(cfg.member_fraction * static_cast<double>(subset.size()))));
        for (std::size_t j = 0; j < std::min(want, order.size()); ++j) {
            members.push_back(&subset[order[j]]);
            targets.push_back(i);
        }
    }

    const int d_in = p.subsets[0].shape.pixel_count();
    const int m = cfg.components > 0
                      ? cfg.components
                      : std::max(1, static_cast<int>(std::llround(0.09 * d_in)));
    if (m > d_in) throw ValidationError("components exceed the pixel dimension");

    Mat pixels(static_cast<Eigen::Index>(members.size()), d_in);
    for (std::size_t i = 0; i < members.size(); ++i)
        pixels.row(static_cast<Eigen::Index>(i)) = flatten_scaled(members[i]->image).transpose();

    CBEOracle cbe;
    cbe.pca = fit_pca(pixels, m);
    cbe.reference_model = reference_model;

    Mat features(static_cast<Eigen::Index>(members.size()), m + reference_model.num_classes + 1);
    for (std::size_t i = 0; i < members.size(); ++i)
        features.row(static_cast<Eigen::Index>(i)) =
            feature_row(cbe.pca, reference_model, *members[i]).transpose();

    cbe.feature_model = train_classifier(features, targets, n, cfg.arch, cfg.train);

    Mat member_post(features.rows(), n);
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        member_post.row(i) = predict_proba(cbe.feature_model, Vec(features.row(i))).transpose();
    Mat nonmember_post(static_cast<Eigen::Index>(nonmembers.size()), n);
    for (std::size_t i = 0; i < nonmembers.size(); ++i) {
        const Vec f = feature_row(cbe.pca, reference_model, nonmembers.samples[i]);
        nonmember_post.row(static_cast<Eigen::Index>(i)) =
            predict_proba(cbe.feature_model, f).transpose();
    }
    cbe.tau_eo = calibrate_tau_eo(member_post, targets, nonmember_post);
    return cbe;
}

ExclusionDecision mce_from_probs(const std::vector<Vec>& probs) {
    if (probs.size() < 2) throw ValidationError("mce needs at least 2 models");
    std::vector<int> votes(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) votes[i] = argmax_first(probs[i]);
    const int elected = majority_vote(votes, probs);
    int excluded = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i](elected) > probs[static_cast<std::size_t>(excluded)](elected))
            excluded = static_cast<int>(i);
    return {excluded, DecisionSource::mce};
}

ExclusionDecision mce_decide(const std::vector<Classifier>& models, const Sample& x) {
    if (models.size() < 2) throw ValidationError("mce needs at least 2 models");
    std::vector<Vec> probs;
    probs.reserve(models.size());
    for (const Classifier& c : models) probs.push_back(predict_proba(c, x));
    return mce_from_probs(probs);
}

ExclusionDecision ese_decide(const SignatureIndex& idx, const Sample& x) {
    const auto hit = lookup_exact(idx, exact_digest(x.image));
    if (!hit) return {};
    return {*hit, DecisionSource::ese};
}

ExclusionDecision ase_decide(const SignatureIndex& idx, const Sample& x, double tau_h) {
    const auto hit = lookup_approx(idx, perceptual_hash(x.image), tau_h);
    if (!hit) return {};
    return {*hit, DecisionSource::ase};
}

ExclusionDecision cbe_decide_from_posterior(const Vec& posterior, double tau_eo) {
    if (posterior.size() < 1) throw ValidationError("empty posterior");
    if (std::isnan(tau_eo) || tau_eo < 0 || tau_eo > 1)
        throw ValidationError("tau_eo must be in [0, 1]");
    const int a = argmax_first(posterior);
    if (posterior(a) >= tau_eo) return {a, DecisionSource::cbe};
    return {};
}

ExclusionDecision cbe_decide(const CBEOracle& cbe, const Sample& x) {
    return cbe_decide_from_posterior(predict_proba(cbe.feature_model, cbe_features(cbe, x)),
                                     cbe.tau_eo);
}

ExclusionDecision coe_decide(const SignatureIndex& idx, const CBEOracle& cbe, const Sample& x,
                             double tau_h) {
    ExclusionDecision d = ese_decide(idx, x);
    if (d.excluded) return d;
    d = ase_decide(idx, x, tau_h);
    if (d.excluded) return d;
    return cbe_decide(cbe, x);
}

namespace {

nlohmann::ordered_json vec_to_json(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vec vec_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_cbe(const CBEOracle& cbe, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = "recusal-cbe";
    j["version"] = 1;
    j["tau_eo"] = cbe.tau_eo;
    auto& jp = j["pca"];
    jp["mean"] = vec_to_json(cbe.pca.mean);
    jp["eigenvalues"] = vec_to_json(cbe.pca.eigenvalues);
    auto& rows = jp["components"] = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < cbe.pca.components.rows(); ++r)
        rows.push_back(vec_to_json(cbe.pca.components.row(r).transpose()));
    j["feature_model"] = detail::classifier_to_json(cbe.feature_model);
    j["reference_model"] = detail::classifier_to_json(cbe.reference_model);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

CBEOracle load_cbe(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    try {
        if (j.at("format") != "recusal-cbe" || j.at("version") != 1)
            throw ParseError(path + ": not a version-1 cbe file");
        CBEOracle cbe;
        cbe.tau_eo = j.at("tau_eo").get<double>();
        const auto& jp = j.at("pca");
        cbe.pca.mean = vec_from_json(jp.at("mean"));
        cbe.pca.eigenvalues = vec_from_json(jp.at("eigenvalues"));
        const auto& rows = jp.at("components");
        if (rows.empty()) throw ParseError(path + ": empty pca components");
        cbe.pca.components = Mat(static_cast<Eigen::Index>(rows.size()), cbe.pca.mean.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const Vec row = vec_from_json(rows[r]);
            if (row.size() != cbe.pca.mean.size())
                throw ParseError(path + ": pca component width mismatch");
            cbe.pca.components.row(static_cast<Eigen::Index>(r)) = row.transpose();
        }
        cbe.feature_model = detail::classifier_from_json(j.at("feature_model"), path);
        cbe.reference_model = detail::classifier_from_json(j.at("reference_model"), path);
        if (std::isnan(cbe.tau_eo) || cbe.tau_eo < 0 || cbe.tau_eo > 1)
            throw ParseError(path + ": tau_eo out of range");
        return cbe;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace recusal
