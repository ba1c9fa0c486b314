#include "recusal/harness.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace recusal {

namespace {

// Rethrows any stage failure with the stage name prefixed, keeping the type.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    const auto tag = [&](const char* what) { return "[stage " + name + "] " + what; };
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(tag(e.what()));
    } catch (const ParseError& e) {
        throw ParseError(tag(e.what()));
    } catch (const IoError& e) {
        throw IoError(tag(e.what()));
    } catch (const TrainingError& e) {
        throw TrainingError(tag(e.what()));
    } catch (const MetricError& e) {
        throw MetricError(tag(e.what()));
    } catch (const AttackError& e) {
        throw AttackError(tag(e.what()));
    } catch (const std::exception& e) {
        throw std::runtime_error(tag(e.what()));
    }
}

std::string trim_zeros(std::string s) {
    if (s.find('.') == std::string::npos) return s;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

// Integral grid values print bare ("4"), others in shortest form ("2.5").
std::string render_grid_value(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15)
        return std::to_string(static_cast<long long>(v));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ParseError(what + ": malformed number '" + s + "'");
    }
}

std::string arm_label(OracleKind k) {
    std::string name = to_string(k);
    for (char& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return name;
}

Dataset like(const Dataset& src) {
    Dataset d;
    d.shape = src.shape;
    d.num_classes = src.num_classes;
    return d;
}

// Appends cfg.augment_copies augmented variants per sample under fresh ids
// (originals keep theirs); identity params make this a no-op.
Dataset augmented_training_set(const Dataset& d, const ExperimentConfig& cfg,
                               std::uint64_t salt) {
    if (cfg.augment_copies == 0) return d;
    Dataset out = d;
    std::uint64_t next_id = 0x8000000000000000ull + salt * 0x100000000ull;
    for (const Sample& s : d.samples) {
        for (int c = 0; c < cfg.augment_copies; ++c) {
            Sample a = augment(s, cfg.augment,
                               cfg.seed ^ (s.id * 1315423911ull + static_cast<std::uint64_t>(c)));
            a.id = next_id++;
            out.samples.push_back(std::move(a));
        }
    }
    return out;
}

double defended_accuracy(const DefendedEnsemble& e, const Dataset& d) {
    long hits = 0;
    for (const Sample& s : d.samples)
        if (defended_predict(e, s).label == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(d.size());
}

bool needs_cbe(const ExperimentConfig& cfg) {
    for (OracleKind k : cfg.arms)
        if (k == OracleKind::cbe || k == OracleKind::coe) return true;
    return false;
}

DefendedEnsemble assemble_ensemble(OracleKind kind, const ExperimentConfig& cfg,
                                   const std::vector<Classifier>& models,
                                   std::shared_ptr<const SignatureIndex> index,
                                   std::shared_ptr<const CBEOracle> cbe) {
    DefendedEnsemble e;
    e.models = models;
    e.index = std::move(index);
    e.cbe = std::move(cbe);
    e.oracle.kind = kind;
    e.oracle.tau_h = cfg.tau_h;
    e.output_mode = cfg.output_mode;
    e.validate();
    return e;
}

// The configured attack against one arm's target.
AttackResult dispatch_attack(AttackKind kind, const TargetModel& target,
                             const BuildContext& ctx) {
    const AttackSuiteConfig& a = ctx.cfg.attacks;
    switch (kind) {
        case AttackKind::threshold: return attack_threshold(target, ctx.attack_data);
        case AttackKind::lr:
            return attack_posterior_model(target, ctx.attack_data, AttackModelKind::lr, a.model);
        case AttackKind::mlp:
            return attack_posterior_model(target, ctx.attack_data, AttackModelKind::mlp, a.model);
        case AttackKind::gap: return attack_gap(target, ctx.attack_data);
        case AttackKind::rotation:
            return attack_rotation(target, ctx.attack_data, a.rotation_deg, a.query);
        case AttackKind::translation:
            return attack_translation(target, ctx.attack_data, a.translation_px, a.query);
        case AttackKind::boundary: {
            const double sigma =
                a.boundary_sigma > 0
                    ? a.boundary_sigma
                    : calibrate_boundary_sigma(target, ctx.attack_data, {0.01, 0.02, 0.05, 0.1},
                                               a.boundary_queries, ctx.cfg.seed + 41);
            return attack_boundary(target, ctx.attack_data, sigma, a.boundary_queries,
                                   ctx.cfg.seed + 43);
        }
    }
    throw ValidationError("unknown attack kind");
}

std::string manipulation_of(AttackKind kind, const AttackSuiteConfig& a) {
    if (kind == AttackKind::rotation) return "r=" + render_grid_value(a.rotation_deg);
    if (kind == AttackKind::translation) return "d=" + std::to_string(a.translation_px);
    return "0";
}

nlohmann::ordered_json report_to_json_impl(const Report& r, bool include_volatile) {
    nlohmann::ordered_json j;
    j["version"] = r.version;
    j["seed"] = r.seed;
    if (include_volatile) j["wall_time_seconds"] = r.wall_time_seconds;
    j["rows"] = nlohmann::ordered_json::array();
    for (const ReportRow& row : r.rows) {
        nlohmann::ordered_json jr;
        jr["eo_type"] = row.eo_type;
        jr["dataset"] = row.dataset;
        jr["manipulation"] = row.manipulation;
        jr["attack_type"] = row.attack_type;
        jr["metrics"] = nlohmann::ordered_json::parse(metrics_to_json(row.metrics));
        j["rows"].push_back(std::move(jr));
    }
    return j;
}

}  // namespace

std::string render_fraction(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    std::string s = trim_zeros(buf);
    if (s.rfind("0.", 0) == 0) return s.substr(1);
    if (s.rfind("-0.", 0) == 0) return "-" + s.substr(2);
    return s;
}

std::string render_percent(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value * 100.0);
    return trim_zeros(buf);
}

std::string attack_label(AttackKind k) {
    switch (k) {
        case AttackKind::threshold: return "Th";
        case AttackKind::lr: return "LR";
        case AttackKind::mlp: return "MLP";
        case AttackKind::gap: return "GAP";
        case AttackKind::rotation: return "RA";
        case AttackKind::translation: return "TA";
        case AttackKind::boundary: return "BA";
    }
    throw ValidationError("unknown attack kind");
}

std::string report_csv(const Report& r) {
    std::string out =
        "eo_type,dataset,manipulation,eo_acc,test_acc,train_acc,attack_type,attack_auc,"
        "attack_adv\n";
    for (const ReportRow& row : r.rows) {
        const MetricsReport& m = row.metrics;
        out += row.eo_type + ',' + row.dataset + ',' + row.manipulation + ',';
        out += m.eo_accuracy ? render_percent(*m.eo_accuracy) : std::string{};
        out += ',' + render_percent(m.model_test_acc) + ',' + render_percent(m.model_train_acc);
        out += ',' + row.attack_type + ',' + render_fraction(m.attack_auc) + ',' +
               render_fraction(m.attack_advantage) + '\n';
    }
    return out;
}

std::string report_json(const Report& r) { return report_to_json_impl(r, true).dump(2); }

std::string report_canonical_json(const Report& r) {
    return report_to_json_impl(r, false).dump(2);
}

void emit_report(const Report& r, const std::string& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << (format == ReportFormat::csv ? report_csv(r) : report_json(r));
    if (format == ReportFormat::json) out << '\n';
    if (!out.flush()) throw IoError("failed writing " + path);
}

Report load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        const nlohmann::json j = nlohmann::json::parse(buf.str());
        Report r;
        r.version = j.at("version").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.wall_time_seconds = j.value("wall_time_seconds", 0.0);
        for (const auto& jr : j.at("rows")) {
            ReportRow row;
            row.eo_type = jr.at("eo_type").get<std::string>();
            row.dataset = jr.at("dataset").get<std::string>();
            row.manipulation = jr.at("manipulation").get<std::string>();
            row.attack_type = jr.at("attack_type").get<std::string>();
            row.metrics = metrics_from_json(jr.at("metrics").dump());
            r.rows.push_back(std::move(row));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

Report load_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    const std::string header =
        "eo_type,dataset,manipulation,eo_acc,test_acc,train_acc,attack_type,attack_auc,"
        "attack_adv";
    if (!std::getline(in, line) || line != header)
        throw ParseError(path + ": unexpected csv header");

    Report r;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 9) throw ParseError(path + ": malformed row '" + line + "'");

        ReportRow row;
        row.eo_type = fields[0];
        row.dataset = fields[1];
        row.manipulation = fields[2];
        row.attack_type = fields[6];
        const std::optional<double> eo =
            fields[3].empty() ? std::nullopt
                              : std::optional<double>(parse_number(fields[3], path) / 100.0);
        const double test = parse_number(fields[4], path) / 100.0;
        const double train = parse_number(fields[5], path) / 100.0;
        const double auc = parse_number(fields[7], path);
        const double adv = parse_number(fields[8], path);
        row.metrics = make_metrics_report(auc, adv, train, test, eo);
        r.rows.push_back(std::move(row));
    }
    return r;
}

double manipulated_eo_accuracy(const DefendedEnsemble& e, const Partition& p,
                               const Dataset& members, const Dataset& nonmembers,
                               const std::function<std::vector<Image>(const Image&)>& queries) {
    long correct = 0, total = 0;
    for (const Sample& s : members.samples) {
        const int sub = p.subset_of(s.id);
        if (sub < 0) throw ValidationError("member id not found in the partition");
        for (const Image& img : queries(s.image)) {
            const ExclusionDecision d = oracle_decide(e, Sample{img, s.label, s.id});
            if (d.excluded && *d.excluded == sub) ++correct;
            ++total;
        }
    }
    for (const Sample& s : nonmembers.samples) {
        for (const Image& img : queries(s.image)) {
            if (!oracle_decide(e, Sample{img, s.label, s.id}).excluded) ++correct;
            ++total;
        }
    }
    if (total == 0) throw MetricError("metric undefined: no oracle decisions");
    return static_cast<double>(correct) / static_cast<double>(total);
}

BuildContext build_context(const ExperimentConfig& cfg) {
    BuildContext ctx;
    ctx.cfg = cfg;
    stage("config", [&] { cfg.validate(); });

    const Dataset pool = stage("dataset", [&] {
        if (cfg.dataset.source == "synthetic")
            return generate_synthetic(cfg.dataset.synthetic.classes,
                                      cfg.dataset.synthetic.per_class, cfg.dataset.synthetic.shape,
                                      cfg.dataset.synthetic.separation, cfg.seed);
        const DatasetSchema schema{cfg.dataset.synthetic.shape, cfg.dataset.synthetic.classes};
        return load_dataset(cfg.dataset.source, cfg.dataset.format, schema);
    });

    stage("split", [&] {
        std::tie(ctx.members, ctx.nonmembers) =
            split_stratified(pool, cfg.dataset.member_fraction, cfg.seed + 1);
    });

    stage("partition", [&] {
        ctx.partition = partition_disjoint(ctx.members, cfg.subsets, cfg.seed + 2);
    });

    // Carve the oracle-training split out of the member pool per subset and
    // out of the non-member pool, so attack splits never touch it.
    Partition cbe_partition;
    Dataset attack_members = like(ctx.members);
    Dataset attack_nonmembers = like(ctx.nonmembers);
    stage("oracle-split", [&] {
        ctx.cbe_members = like(ctx.members);
        for (int i = 0; i < cfg.subsets; ++i) {
            auto [carved, rest] =
                split_stratified(ctx.partition.subsets[static_cast<std::size_t>(i)],
                                 cfg.cbe.member_fraction, cfg.seed + 3 + static_cast<std::uint64_t>(i));
            for (const Sample& s : carved.samples) {
                cbe_partition.origin[s.id] = i;
                ctx.cbe_members.samples.push_back(s);
            }
            cbe_partition.subsets.push_back(std::move(carved));
            for (Sample& s : rest.samples) attack_members.samples.push_back(std::move(s));
        }
        std::tie(ctx.cbe_nonmembers, attack_nonmembers) =
            split_stratified(ctx.nonmembers, cfg.cbe_nonmember_fraction, cfg.seed + 19);
    });

    // Augmentation recovers the accuracy subset models lose to partitioning;
    // the undefended baseline always trains on the raw member pool.
    stage("train", [&] {
        ctx.subset_models.reserve(static_cast<std::size_t>(cfg.subsets));
        for (int i = 0; i < cfg.subsets; ++i) {
            TrainConfig tc = cfg.train;
            tc.seed = cfg.train.seed + static_cast<std::uint64_t>(i) + 1;
            ctx.subset_models.push_back(train_classifier(
                augmented_training_set(ctx.partition.subsets[static_cast<std::size_t>(i)], cfg,
                                       static_cast<std::uint64_t>(i)),
                cfg.arch, tc));
        }
        ctx.full_model = train_classifier(ctx.members, cfg.arch, cfg.train);
    });

    stage("index", [&] {
        ctx.index = std::make_shared<const SignatureIndex>(
            build_signature_index(ctx.partition, cfg.lookup));
    });

    stage("oracle-train", [&] {
        if (!needs_cbe(cfg)) return;
        CBEConfig cc = cfg.cbe;
        cc.member_fraction = 1.0;  // the harness carved the member share already
        ctx.cbe = std::make_shared<const CBEOracle>(
            train_cbe(cbe_partition, ctx.cbe_nonmembers, ctx.full_model, cc));
    });

    stage("attack-split", [&] {
        ctx.attack_data = split_attack_dataset(attack_members, attack_nonmembers,
                                               cfg.attacks.adversary_fraction, cfg.seed + 29);
    });

    stage("audit", [&] {
        std::unordered_set<std::uint64_t> seen;
        for (const Dataset* d :
             {&ctx.attack_data.adversary_members, &ctx.attack_data.adversary_nonmembers,
              &ctx.attack_data.eval_members, &ctx.attack_data.eval_nonmembers, &ctx.cbe_members,
              &ctx.cbe_nonmembers}) {
            for (const Sample& s : d->samples)
                if (!seen.insert(s.id).second)
                    throw ValidationError("split hygiene violated: sample id " +
                                          std::to_string(s.id) + " appears in two splits");
        }
    });

    stage("arms", [&] {
        Arm undefended;
        undefended.label = "Undefended";
        undefended.target = make_target(ctx.full_model, cfg.output_mode, "undefended");
        undefended.train_acc = accuracy(ctx.full_model, ctx.members);
        undefended.test_acc = accuracy(ctx.full_model, ctx.nonmembers);
        ctx.arms.push_back(std::move(undefended));

        for (OracleKind kind : cfg.arms) {
            DefendedEnsemble e =
                assemble_ensemble(kind, cfg, ctx.subset_models, ctx.index, ctx.cbe);
            Arm arm;
            arm.label = arm_label(kind);
            arm.target = make_target(e, "defended-" + to_string(kind));
            arm.train_acc = defended_accuracy(e, ctx.members);
            arm.test_acc = defended_accuracy(e, ctx.nonmembers);
            arm.eo_acc = eo_accuracy(e, ctx.attack_data.eval_members, ctx.partition,
                                     ctx.attack_data.eval_nonmembers);
            arm.ensemble = std::move(e);
            ctx.arms.push_back(std::move(arm));
        }
    });

    return ctx;
}

Report run_attacks(const BuildContext& ctx, std::vector<AttackResult>* raw_scores) {
    const auto started = std::chrono::steady_clock::now();
    Report r;
    r.seed = ctx.cfg.seed;
    for (const Arm& arm : ctx.arms) {
        for (AttackKind kind : ctx.cfg.attacks.run) {
            const AttackResult res = stage("attack-" + to_string(kind),
                                           [&] { return dispatch_attack(kind, arm.target, ctx); });
            ReportRow row;
            row.eo_type = arm.label;
            row.dataset = ctx.cfg.dataset.name;
            row.manipulation = manipulation_of(kind, ctx.cfg.attacks);
            row.attack_type = attack_label(kind);
            row.metrics = make_metrics_report(result_auc(res), result_advantage(res),
                                              arm.train_acc, arm.test_acc, arm.eo_acc);
            r.rows.push_back(std::move(row));
            if (raw_scores) raw_scores->push_back(res);
        }
    }
    r.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return r;
}

Report run_experiment(const ExperimentConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    const BuildContext ctx = build_context(cfg);
    Report r = run_attacks(ctx);
    r.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return r;
}

std::string to_string(SweepKind k) {
    switch (k) {
        case SweepKind::rotation: return "rotation";
        case SweepKind::translation: return "translation";
    }
    throw ValidationError("unknown sweep kind");
}

SweepKind sweep_kind_from_string(const std::string& name) {
    if (name == "rotation") return SweepKind::rotation;
    if (name == "translation") return SweepKind::translation;
    throw ValidationError("unknown sweep kind '" + name + "'");
}

Report sweep_manipulation(const BuildContext& ctx, SweepKind kind,
                          const std::vector<double>& grid,
                          std::vector<AttackResult>* raw_scores) {
    if (grid.empty()) throw ValidationError("sweep grid must not be empty");
    const auto started = std::chrono::steady_clock::now();
    Report r;
    r.seed = ctx.cfg.seed;
    for (double g : grid) {
        std::string manip;
        std::function<std::vector<Image>(const Image&)> queries;
        if (kind == SweepKind::rotation) {
            if (!(g > 0)) throw ValidationError("rotation grid values must be positive");
            manip = "r=" + render_grid_value(g);
            queries = [g](const Image& img) {
                return std::vector<Image>{img, rotate_bilinear(img, g),
                                          rotate_bilinear(img, -g)};
            };
        } else {
            if (g < 1 || g != std::floor(g))
                throw ValidationError("translation grid values must be positive integers");
            const int d = static_cast<int>(g);
            manip = "d=" + std::to_string(d);
            const auto offsets = translation_offsets(d);
            queries = [offsets](const Image& img) {
                std::vector<Image> q;
                q.reserve(offsets.size());
                for (const auto& [dh, dw] : offsets) q.push_back(translate_edge(img, dh, dw));
                return q;
            };
        }

        for (const Arm& arm : ctx.arms) {
            const AttackResult res = stage("sweep-" + to_string(kind), [&] {
                return kind == SweepKind::rotation
                           ? attack_rotation(arm.target, ctx.attack_data, g,
                                             ctx.cfg.attacks.query)
                           : attack_translation(arm.target, ctx.attack_data,
                                                static_cast<int>(g), ctx.cfg.attacks.query);
            });
            std::optional<double> eo;
            if (arm.ensemble)
                eo = manipulated_eo_accuracy(*arm.ensemble, ctx.partition,
                                             ctx.attack_data.eval_members,
                                             ctx.attack_data.eval_nonmembers, queries);
            ReportRow row;
            row.eo_type = arm.label;
            row.dataset = ctx.cfg.dataset.name;
            row.manipulation = manip;
            row.attack_type = kind == SweepKind::rotation ? "RA" : "TA";
            row.metrics = make_metrics_report(result_auc(res), result_advantage(res),
                                              arm.train_acc, arm.test_acc, eo);
            r.rows.push_back(std::move(row));
            if (raw_scores) raw_scores->push_back(res);
        }
    }
    r.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return r;
}

Report sweep_manipulation(const ExperimentConfig& cfg, SweepKind kind,
                          const std::vector<double>& grid) {
    const auto started = std::chrono::steady_clock::now();
    const BuildContext ctx = build_context(cfg);
    Report r = sweep_manipulation(ctx, kind, grid);
    r.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return r;
}

void save_context(const BuildContext& ctx, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

    save_classifier(ctx.full_model, dir + "/full.json");
    nlohmann::ordered_json files;
    files["full"] = "full.json";
    files["subset_models"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ctx.subset_models.size(); ++i) {
        const std::string name = "subset_" + std::to_string(i) + ".json";
        save_classifier(ctx.subset_models[i], dir + "/" + name);
        files["subset_models"].push_back(name);
    }
    save_index(*ctx.index, dir + "/index.json");
    files["index"] = "index.json";
    if (ctx.cbe) {
        save_cbe(*ctx.cbe, dir + "/cbe.json");
        files["cbe"] = "cbe.json";
    } else {
        files["cbe"] = nullptr;
    }

    {
        std::ofstream out(dir + "/config.ini");
        if (!out) throw IoError("cannot open " + dir + "/config.ini for writing");
        out << experiment_config_to_ini(ctx.cfg);
    }

    nlohmann::ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = ctx.cfg.seed;
    manifest["config"] = "config.ini";
    manifest["files"] = std::move(files);
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw IoError("cannot open " + dir + "/manifest.json for writing");
    out << manifest.dump(2) << '\n';
    if (!out.flush()) throw IoError("failed writing " + dir + "/manifest.json");
}

ServedModel load_served_model(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw IoError("cannot open " + dir + "/manifest.json");
    std::stringstream buf;
    buf << in.rdbuf();

    ServedModel served;
    try {
        const nlohmann::json manifest = nlohmann::json::parse(buf.str());
        served.cfg =
            load_experiment_config(dir + "/" + manifest.at("config").get<std::string>());
        const auto& files = manifest.at("files");

        const Classifier full =
            load_classifier(dir + "/" + files.at("full").get<std::string>());
        std::vector<Classifier> models;
        for (const auto& name : files.at("subset_models"))
            models.push_back(load_classifier(dir + "/" + name.get<std::string>()));
        auto index = std::make_shared<const SignatureIndex>(
            load_index(dir + "/" + files.at("index").get<std::string>()));
        std::shared_ptr<const CBEOracle> cbe;
        if (!files.at("cbe").is_null())
            cbe = std::make_shared<const CBEOracle>(
                load_cbe(dir + "/" + files.at("cbe").get<std::string>()));

        Arm undefended;
        undefended.label = "Undefended";
        undefended.target = make_target(full, served.cfg.output_mode, "undefended");
        served.arms.push_back(std::move(undefended));
        for (OracleKind kind : served.cfg.arms) {
            DefendedEnsemble e = assemble_ensemble(kind, served.cfg, models, index, cbe);
            Arm arm;
            arm.label = arm_label(kind);
            arm.target = make_target(e, "defended-" + to_string(kind));
            arm.ensemble = std::move(e);
            served.arms.push_back(std::move(arm));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(dir + "/manifest.json: " + e.what());
    }
    return served;
}

}  // namespace recusal
