#include "recusal/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace recusal {

namespace {

std::string trim(const std::string& s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return {};
    const auto to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
}

// Comments start at '#' or ';' when at the line start or after whitespace.
std::string strip_comment(const std::string& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
        if ((line[i] == '#' || line[i] == ';') &&
            (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t'))
            return line.substr(0, i);
    }
    return line;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

std::string full_precision(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Typed access over parsed INI data that tracks which keys were consumed,
// so any leftover key can be rejected by name.
class IniReader {
public:
    explicit IniReader(IniData data) : data_(std::move(data)) {}

    std::string get(const std::string& sec, const std::string& key, std::string def) {
        const std::string* v = find(sec, key);
        return v ? *v : std::move(def);
    }

    int get_int(const std::string& sec, const std::string& key, int def) {
        const std::string* v = find(sec, key);
        return v ? static_cast<int>(parse_ll(sec, key, *v)) : def;
    }

    std::uint64_t get_u64(const std::string& sec, const std::string& key, std::uint64_t def) {
        const std::string* v = find(sec, key);
        if (!v) return def;
        try {
            std::size_t pos = 0;
            const std::uint64_t out = std::stoull(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("");
            return out;
        } catch (const std::exception&) {
            throw ValidationError(sec + "." + key + ": expected an unsigned integer, got '" +
                                  *v + "'");
        }
    }

    double get_double(const std::string& sec, const std::string& key, double def) {
        const std::string* v = find(sec, key);
        if (!v) return def;
        try {
            std::size_t pos = 0;
            const double out = std::stod(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("");
            return out;
        } catch (const std::exception&) {
            throw ValidationError(sec + "." + key + ": expected a number, got '" + *v + "'");
        }
    }

    bool get_bool(const std::string& sec, const std::string& key, bool def) {
        const std::string* v = find(sec, key);
        if (!v) return def;
        std::string low = *v;
        std::transform(low.begin(), low.end(), low.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (low == "true" || low == "1" || low == "yes" || low == "on") return true;
        if (low == "false" || low == "0" || low == "no" || low == "off") return false;
        throw ValidationError(sec + "." + key + ": expected a boolean, got '" + *v + "'");
    }

    std::vector<std::string> get_list(const std::string& sec, const std::string& key,
                                      const std::string& def) {
        const std::string* v = find(sec, key);
        return split_list(v ? *v : def);
    }

    std::vector<int> get_int_list(const std::string& sec, const std::string& key,
                                  const std::string& def) {
        std::vector<int> out;
        for (const std::string& item : get_list(sec, key, def))
            out.push_back(static_cast<int>(parse_ll(sec, key, item)));
        return out;
    }

    void finish() const {
        for (const auto& [sec, keys] : data_) {
            auto used = consumed_.find(sec);
            if (used == consumed_.end())
                throw ValidationError("unknown config section [" + sec + "]");
            for (const auto& [key, value] : keys)
                if (!used->second.count(key))
                    throw ValidationError("unknown config key " + sec + "." + key);
        }
    }

private:
    const std::string* find(const std::string& sec, const std::string& key) {
        consumed_[sec].insert(key);
        auto s = data_.find(sec);
        if (s == data_.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    long long parse_ll(const std::string& sec, const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const long long out = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return out;
        } catch (const std::exception&) {
            throw ValidationError(sec + "." + key + ": expected an integer, got '" + v + "'");
        }
    }

    IniData data_;
    std::map<std::string, std::set<std::string>> consumed_;
};

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

void check_no_duplicates(const std::vector<std::string>& items, const std::string& what) {
    std::set<std::string> seen(items.begin(), items.end());
    if (seen.size() != items.size())
        throw ValidationError(what + " lists the same entry twice");
}

}  // namespace

IniData parse_ini(const std::string& text) {
    IniData data;
    std::string section;
    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ParseError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
        if (section.empty())
            throw ParseError("line " + std::to_string(line_no) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ParseError("line " + std::to_string(line_no) + ": empty key");
        if (!data[section].emplace(key, trim(line.substr(eq + 1))).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate key " + section +
                             "." + key);
    }
    return data;
}

std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::threshold: return "threshold";
        case AttackKind::lr: return "lr";
        case AttackKind::mlp: return "mlp";
        case AttackKind::gap: return "gap";
        case AttackKind::rotation: return "rotation";
        case AttackKind::translation: return "translation";
        case AttackKind::boundary: return "boundary";
    }
    throw ValidationError("unknown attack kind");
}

AttackKind attack_kind_from_string(const std::string& name) {
    for (AttackKind k : {AttackKind::threshold, AttackKind::lr, AttackKind::mlp, AttackKind::gap,
                         AttackKind::rotation, AttackKind::translation, AttackKind::boundary})
        if (to_string(k) == name) return k;
    throw ValidationError("unknown attack kind '" + name + "'");
}

bool attack_needs_probabilities(AttackKind k) {
    return k == AttackKind::threshold || k == AttackKind::lr || k == AttackKind::mlp;
}

std::string to_string(LookupMode m) {
    switch (m) {
        case LookupMode::hash_table: return "hash_table";
        case LookupMode::sorted_scan: return "sorted_scan";
        case LookupMode::constant_time_scan: return "constant_time_scan";
    }
    throw ValidationError("unknown lookup mode");
}

LookupMode lookup_mode_from_string(const std::string& name) {
    for (LookupMode m :
         {LookupMode::hash_table, LookupMode::sorted_scan, LookupMode::constant_time_scan})
        if (to_string(m) == name) return m;
    throw ValidationError("unknown lookup mode '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (dataset.source.empty()) throw ValidationError("dataset.source must not be empty");
    if (dataset.name.empty() || dataset.name.find_first_of(",\n\r") != std::string::npos)
        throw ValidationError("dataset.name must be a non-empty csv-safe label");
    if (!(dataset.member_fraction > 0.0) || !(dataset.member_fraction < 1.0))
        throw ValidationError("dataset.member_fraction must lie strictly between 0 and 1");
    if (dataset.synthetic.classes < 2) throw ValidationError("dataset.classes must be at least 2");
    if (dataset.synthetic.per_class < 1)
        throw ValidationError("dataset.per_class must be at least 1");
    dataset.synthetic.shape.validate();
    if (!(dataset.synthetic.separation >= 0.0))
        throw ValidationError("dataset.separation must not be negative");

    if (subsets < 2) throw ValidationError("ensemble.subsets must be at least 2");
    if (tau_h < 0.0 || tau_h > 1.0) throw ValidationError("ensemble.tau_h must be in [0, 1]");
    {
        std::vector<std::string> arm_names;
        for (OracleKind k : arms) arm_names.push_back(to_string(k));
        check_no_duplicates(arm_names, "ensemble.arms");
    }

    arch.validate();
    train.validate();
    augment.validate();
    if (augment_copies < 0) throw ValidationError("augment.copies must not be negative");

    cbe.validate();
    if (!(cbe.member_fraction < 1.0))
        throw ValidationError("cbe.member_fraction must stay below 1 so members remain for "
                              "evaluation");
    if (!(cbe_nonmember_fraction > 0.0) || !(cbe_nonmember_fraction < 1.0))
        throw ValidationError("cbe.nonmember_fraction must lie strictly between 0 and 1");

    {
        std::vector<std::string> names;
        for (AttackKind k : attacks.run) names.push_back(to_string(k));
        check_no_duplicates(names, "attacks.run");
    }
    for (AttackKind k : attacks.run)
        if (attack_needs_probabilities(k) && output_mode == OutputMode::label_only)
            throw ValidationError("attacks.run: " + to_string(k) +
                                  " needs probability output but ensemble.output_mode is "
                                  "label_only");
    if (!(attacks.adversary_fraction > 0.0) || !(attacks.adversary_fraction < 1.0))
        throw ValidationError("attacks.adversary_fraction must lie strictly between 0 and 1");
    if (!(attacks.rotation_deg > 0.0))
        throw ValidationError("attacks.rotation must be positive");
    if (attacks.translation_px < 1)
        throw ValidationError("attacks.translation must be at least 1");
    if (attacks.boundary_sigma < 0.0)
        throw ValidationError("attacks.sigma must not be negative");
    if (attacks.boundary_queries < 1)
        throw ValidationError("attacks.queries must be at least 1");
    attacks.model.validate();
    attacks.query.validate();

    if (output_dir.empty()) throw ValidationError("run.output_dir must not be empty");
}

ExperimentConfig experiment_config_from_ini(const std::string& text) {
    IniReader r(parse_ini(text));
    ExperimentConfig c;

    c.dataset.source = r.get("dataset", "source", c.dataset.source);
    c.dataset.name = r.get("dataset", "name", c.dataset.name);
    {
        const std::string fmt = r.get("dataset", "format", "csv");
        if (fmt == "csv")
            c.dataset.format = FileFormat::csv;
        else if (fmt == "cifar_binary")
            c.dataset.format = FileFormat::cifar_binary;
        else
            throw ValidationError("dataset.format: unknown format '" + fmt + "'");
    }
    c.dataset.synthetic.classes = r.get_int("dataset", "classes", c.dataset.synthetic.classes);
    c.dataset.synthetic.per_class =
        r.get_int("dataset", "per_class", c.dataset.synthetic.per_class);
    c.dataset.synthetic.shape.height =
        r.get_int("dataset", "height", c.dataset.synthetic.shape.height);
    c.dataset.synthetic.shape.width =
        r.get_int("dataset", "width", c.dataset.synthetic.shape.width);
    c.dataset.synthetic.shape.channels =
        r.get_int("dataset", "channels", c.dataset.synthetic.shape.channels);
    c.dataset.synthetic.separation =
        r.get_double("dataset", "separation", c.dataset.synthetic.separation);
    c.dataset.member_fraction =
        r.get_double("dataset", "member_fraction", c.dataset.member_fraction);

    c.subsets = r.get_int("ensemble", "subsets", c.subsets);
    c.output_mode =
        output_mode_from_string(r.get("ensemble", "output_mode", to_string(c.output_mode)));
    {
        std::vector<std::string> defaults;
        for (OracleKind k : c.arms) defaults.push_back(to_string(k));
        c.arms.clear();
        for (const std::string& name : r.get_list("ensemble", "arms", join(defaults)))
            c.arms.push_back(oracle_kind_from_string(name));
    }
    c.tau_h = r.get_double("ensemble", "tau_h", c.tau_h);
    c.lookup = lookup_mode_from_string(r.get("ensemble", "lookup", to_string(c.lookup)));

    c.arch.hidden = r.get_int_list("learner", "hidden", "");
    c.train.epochs = r.get_int("learner", "epochs", c.train.epochs);
    c.train.batch_size = r.get_int("learner", "batch", c.train.batch_size);
    c.train.learning_rate = r.get_double("learner", "lr", c.train.learning_rate);
    c.train.l2 = r.get_double("learner", "l2", c.train.l2);
    c.train.seed = r.get_u64("learner", "seed", c.train.seed);

    c.augment_copies = r.get_int("augment", "copies", c.augment_copies);
    c.augment.horizontal_flip = r.get_bool("augment", "flip", c.augment.horizontal_flip);
    c.augment.width_shift = r.get_double("augment", "width_shift", c.augment.width_shift);
    c.augment.height_shift = r.get_double("augment", "height_shift", c.augment.height_shift);
    c.augment.rotation_deg = r.get_double("augment", "rotation", c.augment.rotation_deg);
    c.augment.zoom = r.get_double("augment", "zoom", c.augment.zoom);

    c.cbe.components = r.get_int("cbe", "components", c.cbe.components);
    c.cbe.member_fraction = r.get_double("cbe", "member_fraction", c.cbe.member_fraction);
    c.cbe_nonmember_fraction =
        r.get_double("cbe", "nonmember_fraction", c.cbe_nonmember_fraction);
    c.cbe.arch.hidden = r.get_int_list("cbe", "hidden", "");
    c.cbe.train.epochs = r.get_int("cbe", "epochs", c.cbe.train.epochs);
    c.cbe.train.batch_size = r.get_int("cbe", "batch", c.cbe.train.batch_size);
    c.cbe.train.learning_rate = r.get_double("cbe", "lr", c.cbe.train.learning_rate);
    c.cbe.train.l2 = r.get_double("cbe", "l2", c.cbe.train.l2);
    c.cbe.seed = r.get_u64("cbe", "seed", c.cbe.seed);

    {
        std::vector<std::string> defaults;
        for (AttackKind k : c.attacks.run) defaults.push_back(to_string(k));
        c.attacks.run.clear();
        for (const std::string& name : r.get_list("attacks", "run", join(defaults)))
            c.attacks.run.push_back(attack_kind_from_string(name));
    }
    c.attacks.adversary_fraction =
        r.get_double("attacks", "adversary_fraction", c.attacks.adversary_fraction);
    c.attacks.rotation_deg = r.get_double("attacks", "rotation", c.attacks.rotation_deg);
    c.attacks.translation_px = r.get_int("attacks", "translation", c.attacks.translation_px);
    c.attacks.boundary_sigma = r.get_double("attacks", "sigma", c.attacks.boundary_sigma);
    c.attacks.boundary_queries = r.get_int("attacks", "queries", c.attacks.boundary_queries);
    c.attacks.model.mlp_hidden = r.get_int("attacks", "mlp_hidden", c.attacks.model.mlp_hidden);
    c.attacks.model.feature_count =
        r.get_int("attacks", "feature_count", c.attacks.model.feature_count);
    c.attacks.model.train.epochs =
        r.get_int("attacks", "model_epochs", c.attacks.model.train.epochs);
    c.attacks.model.train.learning_rate =
        r.get_double("attacks", "model_lr", c.attacks.model.train.learning_rate);
    c.attacks.query.train.epochs =
        r.get_int("attacks", "query_epochs", c.attacks.query.train.epochs);
    c.attacks.query.train.learning_rate =
        r.get_double("attacks", "query_lr", c.attacks.query.train.learning_rate);

    c.seed = r.get_u64("run", "seed", c.seed);
    c.output_dir = r.get("run", "output_dir", c.output_dir);

    r.finish();
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return experiment_config_from_ini(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string experiment_config_to_ini(const ExperimentConfig& cfg) {
    cfg.validate();
    std::ostringstream out;
    out << "[dataset]\n";
    out << "source = " << cfg.dataset.source << "\n";
    out << "name = " << cfg.dataset.name << "\n";
    out << "format = " << (cfg.dataset.format == FileFormat::csv ? "csv" : "cifar_binary")
        << "\n";
    out << "classes = " << cfg.dataset.synthetic.classes << "\n";
    out << "per_class = " << cfg.dataset.synthetic.per_class << "\n";
    out << "height = " << cfg.dataset.synthetic.shape.height << "\n";
    out << "width = " << cfg.dataset.synthetic.shape.width << "\n";
    out << "channels = " << cfg.dataset.synthetic.shape.channels << "\n";
    out << "separation = " << full_precision(cfg.dataset.synthetic.separation) << "\n";
    out << "member_fraction = " << full_precision(cfg.dataset.member_fraction) << "\n";

    out << "\n[ensemble]\n";
    out << "subsets = " << cfg.subsets << "\n";
    out << "output_mode = " << to_string(cfg.output_mode) << "\n";
    {
        std::vector<std::string> names;
        for (OracleKind k : cfg.arms) names.push_back(to_string(k));
        out << "arms = " << join(names) << "\n";
    }
    out << "tau_h = " << full_precision(cfg.tau_h) << "\n";
    out << "lookup = " << to_string(cfg.lookup) << "\n";

    out << "\n[learner]\n";
    {
        std::vector<std::string> dims;
        for (int h : cfg.arch.hidden) dims.push_back(std::to_string(h));
        out << "hidden = " << join(dims) << "\n";
    }
    out << "epochs = " << cfg.train.epochs << "\n";
    out << "batch = " << cfg.train.batch_size << "\n";
    out << "lr = " << full_precision(cfg.train.learning_rate) << "\n";
    out << "l2 = " << full_precision(cfg.train.l2) << "\n";
    out << "seed = " << cfg.train.seed << "\n";

    out << "\n[augment]\n";
    out << "copies = " << cfg.augment_copies << "\n";
    out << "flip = " << (cfg.augment.horizontal_flip ? "true" : "false") << "\n";
    out << "width_shift = " << full_precision(cfg.augment.width_shift) << "\n";
    out << "height_shift = " << full_precision(cfg.augment.height_shift) << "\n";
    out << "rotation = " << full_precision(cfg.augment.rotation_deg) << "\n";
    out << "zoom = " << full_precision(cfg.augment.zoom) << "\n";

    out << "\n[cbe]\n";
    out << "components = " << cfg.cbe.components << "\n";
    out << "member_fraction = " << full_precision(cfg.cbe.member_fraction) << "\n";
    out << "nonmember_fraction = " << full_precision(cfg.cbe_nonmember_fraction) << "\n";
    {
        std::vector<std::string> dims;
        for (int h : cfg.cbe.arch.hidden) dims.push_back(std::to_string(h));
        out << "hidden = " << join(dims) << "\n";
    }
    out << "epochs = " << cfg.cbe.train.epochs << "\n";
    out << "batch = " << cfg.cbe.train.batch_size << "\n";
    out << "lr = " << full_precision(cfg.cbe.train.learning_rate) << "\n";
    out << "l2 = " << full_precision(cfg.cbe.train.l2) << "\n";
    out << "seed = " << cfg.cbe.seed << "\n";

    out << "\n[attacks]\n";
    {
        std::vector<std::string> names;
        for (AttackKind k : cfg.attacks.run) names.push_back(to_string(k));
        out << "run = " << join(names) << "\n";
    }
    out << "adversary_fraction = " << full_precision(cfg.attacks.adversary_fraction) << "\n";
    out << "rotation = " << full_precision(cfg.attacks.rotation_deg) << "\n";
    out << "translation = " << cfg.attacks.translation_px << "\n";
    out << "sigma = " << full_precision(cfg.attacks.boundary_sigma) << "\n";
    out << "queries = " << cfg.attacks.boundary_queries << "\n";
    out << "mlp_hidden = " << cfg.attacks.model.mlp_hidden << "\n";
    out << "feature_count = " << cfg.attacks.model.feature_count << "\n";
    out << "model_epochs = " << cfg.attacks.model.train.epochs << "\n";
    out << "model_lr = " << full_precision(cfg.attacks.model.train.learning_rate) << "\n";
    out << "query_epochs = " << cfg.attacks.query.train.epochs << "\n";
    out << "query_lr = " << full_precision(cfg.attacks.query.train.learning_rate) << "\n";

    out << "\n[run]\n";
    out << "seed = " << cfg.seed << "\n";
    out << "output_dir = " << cfg.output_dir << "\n";
    return out.str();
}

}  // namespace recusal
