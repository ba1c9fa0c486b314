#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recusal/ensemble.hpp"
#include "recusal/metrics.hpp"
#include "recusal/signature.hpp"

using namespace recusal;

namespace {

// O(P*N) rank statistic: fraction of member/non-member pairs ranked correctly,
// ties counted as half. Written independently of the curve-based production path.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& m) {
    double wins = 0;
    long pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (m[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (m[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                wins += 1.0;
            else if (s[i] == s[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Brute force over every threshold: classify score >= t as member, take the
// best tpr - fpr. The empty classifier (t above all scores) scores zero.
double scan_advantage(const std::vector<double>& s, const std::vector<int>& m) {
    long members = 0, nonmembers = 0;
    for (int bit : m) (bit ? members : nonmembers)++;
    double best = 0;
    for (double t : s) {
        long tp = 0, fp = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= t) (m[i] ? tp : fp)++;
        best = std::max(best, static_cast<double>(tp) / static_cast<double>(members) -
                                  static_cast<double>(fp) / static_cast<double>(nonmembers));
    }
    return best;
}

struct Instance {
    std::vector<double> scores;
    std::vector<int> membership;
};

Instance random_instance(Rng& rng, bool integer_scores) {
    std::uniform_int_distribution<int> size(1, 30);
    const int members = size(rng);
    const int nonmembers = size(rng);
    Instance inst;
    std::uniform_int_distribution<int> coarse(0, 7);
    std::normal_distribution<double> fine(0.0, 1.0);
    for (int i = 0; i < members + nonmembers; ++i) {
        inst.membership.push_back(i < members ? 1 : 0);
        inst.scores.push_back(integer_scores ? static_cast<double>(coarse(rng)) : fine(rng));
    }
    return inst;
}

Classifier constant_model(int input_dim, const std::vector<double>& logits) {
    Classifier c;
    c.input_dim = input_dim;
    c.num_classes = static_cast<int>(logits.size());
    c.w.push_back(Mat::Zero(c.num_classes, input_dim));
    c.b.push_back(Eigen::Map<const Vec>(logits.data(), c.num_classes));
    return c;
}

}  // namespace

TEST_CASE("roc auc matches the pairwise rank statistic") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const Instance inst = random_instance(rng, trial % 2 == 0);
        const double auc = roc_auc(inst.scores, inst.membership);
        CHECK(std::abs(auc - pairwise_auc(inst.scores, inst.membership)) <= 1e-9);
    }
}

TEST_CASE("roc curve shape and hand-worked values") {
    const std::vector<double> s{3, 2, 1};
    const std::vector<int> m{1, 0, 1};
    const RocCurve c = roc_curve(s, m);
    REQUIRE(c.points.size() == 4);
    CHECK(c.points[0].fpr == 0.0);
    CHECK(c.points[0].tpr == 0.0);
    CHECK(c.points[1].fpr == 0.0);
    CHECK(c.points[1].tpr == 0.5);
    CHECK(c.points[2].fpr == 1.0);
    CHECK(c.points[2].tpr == 0.5);
    CHECK(c.points[3].fpr == 1.0);
    CHECK(c.points[3].tpr == 1.0);
    CHECK(roc_auc(s, m) == 0.5);

    // all scores tied collapses to the diagonal endpoints
    const RocCurve flat = roc_curve({1.0, 1.0}, {1, 0});
    REQUIRE(flat.points.size() == 2);
    CHECK(flat.points[1].fpr == 1.0);
    CHECK(flat.points[1].tpr == 1.0);

    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const Instance inst = random_instance(rng, trial % 2 == 0);
        const RocCurve curve = roc_curve(inst.scores, inst.membership);
        const std::set<double> distinct(inst.scores.begin(), inst.scores.end());
        CHECK(curve.points.size() == distinct.size() + 1);
        CHECK(curve.points.front().fpr == 0.0);
        CHECK(curve.points.front().tpr == 0.0);
        CHECK(curve.points.back().fpr == 1.0);
        CHECK(curve.points.back().tpr == 1.0);
        for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
            CHECK(curve.points[i].fpr <= curve.points[i + 1].fpr);
            CHECK(curve.points[i].tpr <= curve.points[i + 1].tpr);
        }
        for (const RocPoint& p : curve.points) {
            CHECK(p.fpr >= 0.0);
            CHECK(p.fpr <= 1.0);
            CHECK(p.tpr >= 0.0);
            CHECK(p.tpr <= 1.0);
        }
    }
}

TEST_CASE("complement symmetry of auc") {
    Rng rng(512);
    for (int trial = 0; trial < 200; ++trial) {
        const Instance inst = random_instance(rng, trial % 2 == 0);
        const double auc = roc_auc(inst.scores, inst.membership);

        std::vector<int> flipped;
        for (int bit : inst.membership) flipped.push_back(1 - bit);
        CHECK(std::abs(roc_auc(inst.scores, flipped) - (1.0 - auc)) <= 1e-12);

        std::vector<double> negated;
        for (double v : inst.scores) negated.push_back(-v);
        CHECK(std::abs(roc_auc(negated, inst.membership) - (1.0 - auc)) <= 1e-12);
    }
}

TEST_CASE("auc and advantage are invariant under monotone score transforms") {
    Rng rng(77);
    std::uniform_int_distribution<int> coarse(-10, 10);
    for (int trial = 0; trial < 100; ++trial) {
        Instance inst = random_instance(rng, true);
        for (double& v : inst.scores) v = static_cast<double>(coarse(rng));

        std::vector<double> cubed, exped;
        for (double v : inst.scores) {
            cubed.push_back(v * v * v);
            exped.push_back(std::exp(v / 4.0));
        }
        const RocCurve base = roc_curve(inst.scores, inst.membership);
        for (const auto& t : {cubed, exped}) {
            const RocCurve mapped = roc_curve(t, inst.membership);
            REQUIRE(mapped.points.size() == base.points.size());
            for (std::size_t i = 0; i < base.points.size(); ++i) {
                CHECK(mapped.points[i].fpr == base.points[i].fpr);
                CHECK(mapped.points[i].tpr == base.points[i].tpr);
            }
            CHECK(roc_auc(t, inst.membership) == roc_auc(inst.scores, inst.membership));
            CHECK(attack_advantage(t, inst.membership) ==
                  attack_advantage(inst.scores, inst.membership));
        }
    }
}

TEST_CASE("advantage equals the exhaustive threshold scan") {
    Rng rng(31337);
    for (int trial = 0; trial < 300; ++trial) {
        const Instance inst = random_instance(rng, trial % 2 == 0);
        const double adv = attack_advantage(inst.scores, inst.membership);
        CHECK(adv == scan_advantage(inst.scores, inst.membership));

        // the advantage is the largest vertical gap between the curve and the diagonal
        const RocCurve c = roc_curve(inst.scores, inst.membership);
        double best = 0;
        for (const RocPoint& p : c.points) best = std::max(best, p.tpr - p.fpr);
        CHECK(std::abs(adv - best) <= 1e-12);
        CHECK(adv >= 0.0);
        CHECK(adv <= 1.0);
    }
}

TEST_CASE("advantage of a binary decision rule is tpr minus fpr") {
    // 16 members of which 8 flagged, 16 non-members of which 4 flagged
    std::vector<double> scores;
    std::vector<int> membership;
    for (int i = 0; i < 16; ++i) {
        scores.push_back(i < 8 ? 1.0 : 0.0);
        membership.push_back(1);
    }
    for (int i = 0; i < 16; ++i) {
        scores.push_back(i < 4 ? 1.0 : 0.0);
        membership.push_back(0);
    }
    CHECK(attack_advantage(scores, membership) == 8.0 / 16.0 - 4.0 / 16.0);

    // a rule that is worse than chance never reports a negative advantage
    std::vector<double> inverted;
    for (double v : scores) inverted.push_back(1.0 - v);
    CHECK(attack_advantage(inverted, membership) == 0.0);
}

TEST_CASE("generalization gap from label outputs") {
    const Shape shape{2, 2, 1};
    auto sample = [&](std::uint64_t id, int label) {
        return Sample{{shape, std::vector<std::uint8_t>(4, 0)}, label, id};
    };
    Dataset train{{sample(0, 0), sample(1, 1), sample(2, 0), sample(3, 1)}};
    Dataset test{{sample(10, 0), sample(11, 1), sample(12, 0), sample(13, 1)}};

    std::map<std::uint64_t, int> predicted{{0, 0}, {1, 1}, {2, 0}, {3, 0},
                                           {10, 1}, {11, 1}, {12, 1}, {13, 0}};
    auto label_of = [&](const Sample& s) { return predicted.at(s.id); };

    CHECK(generalization_gap(label_of, train, test) == 0.75 - 0.25);
    CHECK(generalization_gap(label_of, test, train) == 0.25 - 0.75);
    CHECK_THROWS_AS(generalization_gap(label_of, Dataset{}, test), ValidationError);
    CHECK_THROWS_AS(generalization_gap(label_of, train, Dataset{}), ValidationError);
}

TEST_CASE("eo accuracy recount on random decision streams") {
    Rng rng(4242);
    std::uniform_int_distribution<int> subset(0, 3);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto random_decision = [&]() {
        ExclusionDecision d;
        if (coin(rng) < 0.6) {
            d.excluded = subset(rng);
            d.source = DecisionSource::ese;
        }
        return d;
    };

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ExclusionDecision> md, nd;
        std::vector<int> truth;
        const int members = 1 + subset(rng) * 100;
        const int nonmembers = 1 + subset(rng) * 75;
        for (int i = 0; i < members; ++i) {
            md.push_back(random_decision());
            truth.push_back(subset(rng));
        }
        for (int i = 0; i < nonmembers; ++i) nd.push_back(random_decision());

        long correct = 0;
        for (int i = 0; i < members; ++i)
            if (md[static_cast<std::size_t>(i)].excluded &&
                *md[static_cast<std::size_t>(i)].excluded == truth[static_cast<std::size_t>(i)])
                ++correct;
        for (const auto& d : nd)
            if (!d.excluded) ++correct;

        CHECK(eo_accuracy(md, truth, nd) ==
              static_cast<double>(correct) / static_cast<double>(members + nonmembers));
    }

    // hand-worked: one right exclusion, one wrong, one correct pass, one false exclusion
    std::vector<ExclusionDecision> md{{1, DecisionSource::ese}, {0, DecisionSource::ese}};
    std::vector<int> truth{1, 2};
    std::vector<ExclusionDecision> nd{{}, {3, DecisionSource::ase}};
    CHECK(eo_accuracy(md, truth, nd) == 0.5);

    CHECK_THROWS_AS(eo_accuracy({}, {}, {}), MetricError);
    CHECK_THROWS_AS(eo_accuracy(md, std::vector<int>{1}, nd), ValidationError);
}

TEST_CASE("ensemble eo accuracy is perfect for exact lookup on clean data") {
    const Dataset pool = generate_synthetic(2, 80, Shape{6, 6, 3}, 1.0, 7);
    const auto [members, held_out] = split_stratified(pool, 0.5, 11);
    const Partition p = partition_disjoint(members, 2, 13);

    DefendedEnsemble e;
    e.models = {constant_model(pool.samples[0].image.shape.pixel_count(), {0.3, 0.7}),
                constant_model(pool.samples[0].image.shape.pixel_count(), {0.6, 0.4})};
    e.index = std::make_shared<SignatureIndex>(build_signature_index(p, LookupMode::hash_table));
    e.oracle.kind = OracleKind::ese;

    CHECK(eo_accuracy(e, members, p, held_out) == 1.0);

    // a member missing from the partition is a caller error
    Dataset stray = members;
    stray.samples[0].id = 999999;
    CHECK_THROWS_AS(eo_accuracy(e, stray, p, held_out), ValidationError);
}

TEST_CASE("metrics report json round trip") {
    const MetricsReport r =
        make_metrics_report(1.0 / 3.0, 0.125, 0.9637, 0.7211, 0.9813);
    const MetricsReport back = metrics_from_json(metrics_to_json(r));
    CHECK(back.attack_auc == r.attack_auc);
    CHECK(back.attack_advantage == r.attack_advantage);
    CHECK(back.model_test_acc == r.model_test_acc);
    CHECK(back.model_train_acc == r.model_train_acc);
    CHECK(back.generalization_gap == r.generalization_gap);
    REQUIRE(back.eo_accuracy.has_value());
    CHECK(*back.eo_accuracy == *r.eo_accuracy);

    const MetricsReport bare = make_metrics_report(0.5, 0.0, 0.8, 0.8, std::nullopt);
    CHECK(!metrics_from_json(metrics_to_json(bare)).eo_accuracy.has_value());

    CHECK_THROWS_AS(metrics_from_json("not json"), ParseError);
    CHECK_THROWS_AS(metrics_from_json("{}"), ParseError);
    CHECK_THROWS_AS(metrics_from_json(R"({"attack_auc": "high"})"), ParseError);

    // a report whose gap disagrees with its accuracies is rejected on load
    std::string tampered = metrics_to_json(r);
    const std::string needle = "\"generalization_gap\":";
    const auto pos = tampered.find(needle);
    REQUIRE(pos != std::string::npos);
    tampered.replace(pos, tampered.find_first_of(",\n", pos) - pos,
                     needle + " 0.123");
    CHECK_THROWS_AS(metrics_from_json(tampered), ValidationError);
}

TEST_CASE("metrics report construction rejects out-of-range values") {
    CHECK_THROWS_AS(make_metrics_report(1.5, 0.0, 0.8, 0.7, std::nullopt), ValidationError);
    CHECK_THROWS_AS(make_metrics_report(-0.1, 0.0, 0.8, 0.7, std::nullopt), ValidationError);
    CHECK_THROWS_AS(make_metrics_report(0.6, 1.5, 0.8, 0.7, std::nullopt), ValidationError);
    CHECK_THROWS_AS(make_metrics_report(0.6, 0.0, 1.2, 0.7, std::nullopt), ValidationError);
    CHECK_THROWS_AS(make_metrics_report(0.6, 0.0, 0.8, -0.2, std::nullopt), ValidationError);
    CHECK_THROWS_AS(make_metrics_report(0.6, 0.0, 0.8, 0.7, 1.2), ValidationError);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(make_metrics_report(nan, 0.0, 0.8, 0.7, std::nullopt), ValidationError);
}

TEST_CASE("metrics csv layout") {
    CHECK(metrics_csv_header() == "eo_acc,test_acc,train_acc,attack_auc,attack_adv");

    const MetricsReport r = make_metrics_report(2.0 / 3.0, 0.25, 0.95, 0.80, 1.0 / 7.0);
    auto split = [](const std::string& row) {
        std::vector<std::string> fields;
        std::stringstream ss(row);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!row.empty() && row.back() == ',') fields.push_back("");
        return fields;
    };

    const auto fields = split(metrics_csv_row(r));
    REQUIRE(fields.size() == 5);
    CHECK(std::stod(fields[0]) == *r.eo_accuracy);
    CHECK(std::stod(fields[1]) == r.model_test_acc);
    CHECK(std::stod(fields[2]) == r.model_train_acc);
    CHECK(std::stod(fields[3]) == r.attack_auc);
    CHECK(std::stod(fields[4]) == r.attack_advantage);

    const MetricsReport bare = make_metrics_report(0.5123, 0.0123, 0.8, 0.7, std::nullopt);
    const auto bare_fields = split(metrics_csv_row(bare));
    REQUIRE(bare_fields.size() == 5);
    CHECK(bare_fields[0].empty());
    CHECK(std::stod(bare_fields[3]) == bare.attack_auc);
}

TEST_CASE("score vector validation") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(roc_auc({1.0, nan}, {1, 0}), ValidationError);
    CHECK_THROWS_AS(roc_auc({1.0, 2.0}, {1}), ValidationError);
    CHECK_THROWS_AS(roc_auc({}, {}), ValidationError);
    CHECK_THROWS_AS(roc_auc({1.0, 2.0}, {1, 2}), ValidationError);
    CHECK_THROWS_AS(roc_auc({1.0, 2.0}, {1, 1}), MetricError);
    CHECK_THROWS_AS(roc_auc({1.0, 2.0}, {0, 0}), MetricError);
    CHECK_THROWS_AS(attack_advantage({1.0}, {1}), MetricError);
}
