#pragma once

#include "recusal/dataset.hpp"

#include <string>
#include <vector>

namespace recusal {

// Empty hidden list = plain softmax regression; otherwise a feed-forward
// network with tanh hidden activations and a softmax output.
struct Architecture {
    std::vector<int> hidden;

    void validate() const;
    bool operator==(const Architecture&) const = default;
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.05;
    double l2 = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Classifier {
    Architecture arch;
    int input_dim = 0;
    int num_classes = 0;
    std::vector<Mat> w;  // per layer, rows = outputs
    std::vector<Vec> b;
};

struct Gradients {
    std::vector<Mat> w;
    std::vector<Vec> b;
};

// Mini-batch SGD on categorical cross-entropy with optional L2 on weights.
// Initial weights are uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] drawn
// from `cfg.seed`; batches are reshuffled each epoch from the same stream,
// so identical inputs give bitwise-identical models. A non-finite epoch
// loss aborts with a TrainingError naming the epoch.
Classifier train_classifier(const Mat& x, const std::vector<int>& y, int num_classes,
                            const Architecture& arch, const TrainConfig& cfg);

// Convenience overload: flattens pixels and scales them to [0,1].
Classifier train_classifier(const Dataset& d, const Architecture& arch, const TrainConfig& cfg);

Vec predict_proba(const Classifier& c, const Vec& x);
Vec predict_proba(const Classifier& c, const Sample& s);
int predict_label(const Classifier& c, const Vec& x);
int predict_label(const Classifier& c, const Sample& s);

double accuracy(const Classifier& c, const Mat& x, const std::vector<int>& y);
double accuracy(const Classifier& c, const Dataset& d);

// Full-batch objective and its analytic gradients, exposed so tests can
// verify backpropagation against finite differences.
double batch_loss(const Classifier& c, const Mat& x, const std::vector<int>& y, double l2);
Gradients batch_gradients(const Classifier& c, const Mat& x, const std::vector<int>& y, double l2);

// Versioned JSON dump; doubles survive the round trip losslessly.
void save_classifier(const Classifier& c, const std::string& path);
Classifier load_classifier(const std::string& path);

}  // namespace recusal
