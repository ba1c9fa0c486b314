#include "recusal/learner.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json_io.hpp"

namespace recusal {

void Architecture::validate() const {
    for (int h : hidden)
        if (h < 1) throw ValidationError("hidden layer sizes must be >= 1");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
        throw ValidationError("learning_rate must be positive and finite");
    if (l2 < 0 || !std::isfinite(l2)) throw ValidationError("l2 must be >= 0 and finite");
}

namespace {

std::vector<int> layer_dims(const Classifier& c) {
    std::vector<int> dims{c.input_dim};
    dims.insert(dims.end(), c.arch.hidden.begin(), c.arch.hidden.end());
    dims.push_back(c.num_classes);
    return dims;
}

// Rows are softmax'ed in place with the max-shift trick.
void softmax_rows(Mat& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - m).exp();
        z.row(i) /= z.row(i).sum();
    }
}

// Forward pass keeping activations; a[0] is the input batch.
std::vector<Mat> forward(const Classifier& c, const Mat& x) {
    std::vector<Mat> a{x};
    for (std::size_t l = 0; l < c.w.size(); ++l) {
        Mat z = a.back() * c.w[l].transpose();
        z.rowwise() += c.b[l].transpose();
        if (l + 1 < c.w.size()) z = z.array().tanh();
        a.push_back(std::move(z));
    }
    softmax_rows(a.back());
    return a;
}

double nll_mean(const Mat& probs, const std::vector<int>& y, Eigen::Index lo, Eigen::Index n) {
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        loss -= std::log(probs(i, y[static_cast<std::size_t>(lo + i)]));
    return loss / static_cast<double>(n);
}

// Saturated softmax keeps losses finite even when updates explode, so treat
// an absurd cross-entropy as divergence too; honest losses top out near
// log(num_classes).
constexpr double kDivergenceLoss = 1e3;

void check_xy(const Mat& x, const std::vector<int>& y, int num_classes) {
    if (x.rows() == 0) throw ValidationError("training set is empty");
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw ValidationError("feature rows and labels disagree");
    if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
    for (int label : y)
        if (label < 0 || label >= num_classes) throw ValidationError("label out of range");
}

struct BackpropOut {
    Gradients g;
    double data_loss = 0;
};

// Gradients of mean cross-entropy over the batch rows [lo, lo+n) plus the
// L2 term on weights.
BackpropOut backprop(const Classifier& c, const std::vector<Mat>& a, const std::vector<int>& y,
                     std::size_t lo, double l2) {
    const Eigen::Index n = a[0].rows();
    BackpropOut out;
    out.g.w.resize(c.w.size());
    out.g.b.resize(c.b.size());
    out.data_loss = nll_mean(a.back(), y, static_cast<Eigen::Index>(lo), n);

    Mat delta = a.back();  // probs
    for (Eigen::Index i = 0; i < n; ++i) delta(i, y[lo + static_cast<std::size_t>(i)]) -= 1.0;
    delta /= static_cast<double>(n);

    for (std::size_t l = c.w.size(); l-- > 0;) {
        out.g.w[l] = delta.transpose() * a[l] + l2 * c.w[l];
        out.g.b[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Mat da = delta * c.w[l];
            delta = da.array() * (1.0 - a[l].array().square());
        }
    }
    return out;
}

}  // namespace

Classifier train_classifier(const Mat& x, const std::vector<int>& y, int num_classes,
                            const Architecture& arch, const TrainConfig& cfg) {
    arch.validate();
    cfg.validate();
    check_xy(x, y, num_classes);

    Classifier c;
    c.arch = arch;
    c.input_dim = static_cast<int>(x.cols());
    c.num_classes = num_classes;

    Rng rng(cfg.seed);
    const auto dims = layer_dims(c);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l], fan_out = dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Mat w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
        c.w.push_back(std::move(w));
        c.b.push_back(Vec::Zero(fan_out));
    }

    const auto total = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> batch_y;
    const auto bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), total);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < total; start += bs) {
            const auto n = std::min(bs, total - start);
            Mat bx(static_cast<Eigen::Index>(n), x.cols());
            batch_y.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                bx.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
                batch_y[i] = y[order[start + i]];
            }
            const auto acts = forward(c, bx);
            const auto bp = backprop(c, acts, batch_y, 0, cfg.l2);
            for (std::size_t l = 0; l < c.w.size(); ++l) {
                c.w[l] -= cfg.learning_rate * bp.g.w[l];
                c.b[l] -= cfg.learning_rate * bp.g.b[l];
            }
            epoch_loss += bp.data_loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        if (!std::isfinite(epoch_loss) || epoch_loss > kDivergenceLoss)
            throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                                ": loss " + std::to_string(epoch_loss));
    }
    return c;
}

Classifier train_classifier(const Dataset& d, const Architecture& arch, const TrainConfig& cfg) {
    d.validate();
    if (d.empty()) throw ValidationError("training set is empty");
    std::vector<int> y;
    y.reserve(d.size());
    for (const Sample& s : d.samples) y.push_back(s.label);
    return train_classifier(flatten_scaled(d), y, d.num_classes, arch, cfg);
}

Vec predict_proba(const Classifier& c, const Vec& x) {
    if (x.size() != c.input_dim)
        throw ValidationError("predict: expected " + std::to_string(c.input_dim) +
                              " features, got " + std::to_string(x.size()));
    Mat row = x.transpose();
    return forward(c, row).back().row(0).transpose();
}

Vec predict_proba(const Classifier& c, const Sample& s) {
    return predict_proba(c, flatten_scaled(s.image));
}

int predict_label(const Classifier& c, const Vec& x) {
    const Vec p = predict_proba(c, x);
    int best = 0;
    for (int i = 1; i < p.size(); ++i)
        if (p(i) > p(best)) best = i;
    return best;
}

int predict_label(const Classifier& c, const Sample& s) {
    return predict_label(c, flatten_scaled(s.image));
}

double accuracy(const Classifier& c, const Mat& x, const std::vector<int>& y) {
    check_xy(x, y, c.num_classes);
    const auto probs = forward(c, x).back();
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < probs.cols(); ++j)
            if (probs(i, j) > probs(i, best)) best = j;
        hits += best == y[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

double accuracy(const Classifier& c, const Dataset& d) {
    std::vector<int> y;
    y.reserve(d.size());
    for (const Sample& s : d.samples) y.push_back(s.label);
    return accuracy(c, flatten_scaled(d), y);
}

double batch_loss(const Classifier& c, const Mat& x, const std::vector<int>& y, double l2) {
    check_xy(x, y, c.num_classes);
    const auto acts = forward(c, x);
    double loss = nll_mean(acts.back(), y, 0, x.rows());
    for (const Mat& w : c.w) loss += 0.5 * l2 * w.squaredNorm();
    return loss;
}

Gradients batch_gradients(const Classifier& c, const Mat& x, const std::vector<int>& y, double l2) {
    check_xy(x, y, c.num_classes);
    const auto acts = forward(c, x);
    return backprop(c, acts, y, 0, l2).g;
}

namespace detail {

nlohmann::ordered_json classifier_to_json(const Classifier& c) {
    nlohmann::ordered_json j;
    j["format"] = "recusal-classifier";
    j["version"] = 1;
    j["input_dim"] = c.input_dim;
    j["num_classes"] = c.num_classes;
    j["hidden"] = c.arch.hidden;
    auto& jw = j["weights"] = nlohmann::ordered_json::array();
    auto& jb = j["biases"] = nlohmann::ordered_json::array();
    for (const Mat& w : c.w) {
        std::vector<double> flat(static_cast<std::size_t>(w.size()));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j2 = 0; j2 < w.cols(); ++j2)
                flat[static_cast<std::size_t>(i * w.cols() + j2)] = w(i, j2);
        jw.push_back(flat);
    }
    for (const Vec& b : c.b) jb.push_back(std::vector<double>(b.data(), b.data() + b.size()));
    return j;
}

Classifier classifier_from_json(const nlohmann::json& j, const std::string& context) {
    try {
        if (j.at("format") != "recusal-classifier" || j.at("version") != 1)
            throw ParseError(context + ": not a version-1 classifier file");
        Classifier c;
        c.input_dim = j.at("input_dim").get<int>();
        c.num_classes = j.at("num_classes").get<int>();
        c.arch.hidden = j.at("hidden").get<std::vector<int>>();
        const auto dims = layer_dims(c);
        const auto& jw = j.at("weights");
        const auto& jb = j.at("biases");
        if (jw.size() + 1 != dims.size() || jb.size() + 1 != dims.size())
            throw ParseError(context + ": layer count mismatch");
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const auto rows = static_cast<Eigen::Index>(dims[l + 1]);
            const auto cols = static_cast<Eigen::Index>(dims[l]);
            const auto flat = jw[l].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
                throw ParseError(context + ": weight size mismatch at layer " + std::to_string(l));
            Mat w(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j2 = 0; j2 < cols; ++j2)
                    w(i, j2) = flat[static_cast<std::size_t>(i * cols + j2)];
            c.w.push_back(std::move(w));
            const auto bv = jb[l].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(bv.size()) != rows)
                throw ParseError(context + ": bias size mismatch at layer " + std::to_string(l));
            c.b.push_back(Eigen::Map<const Vec>(bv.data(), rows));
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(context + ": " + e.what());
    }
}

}  // namespace detail

void save_classifier(const Classifier& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << detail::classifier_to_json(c).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

Classifier load_classifier(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return detail::classifier_from_json(j, path);
}

}  // namespace recusal
