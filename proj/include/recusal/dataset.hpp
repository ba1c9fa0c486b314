#pragma once

#include "recusal/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace recusal {

struct Shape {
    int height = 0;
    int width = 0;
    int channels = 0;

    int pixel_count() const { return height * width * channels; }
    bool operator==(const Shape&) const = default;
    void validate() const;
};

// Pixels live in [0,255], stored row-major and channel-interleaved:
// index(h, w, c) = (h * width + w) * channels + c.
struct Image {
    Shape shape;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int h, int w, int c) {
        return pixels[static_cast<std::size_t>((h * shape.width + w) * shape.channels + c)];
    }
    std::uint8_t at(int h, int w, int c) const {
        return pixels[static_cast<std::size_t>((h * shape.width + w) * shape.channels + c)];
    }
};

struct Sample {
    Image image;
    int label = 0;
    std::uint64_t id = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    Shape shape;
    int num_classes = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    void validate() const;
};

// Disjoint split of a dataset; `origin` maps sample id to its subset index.
struct Partition {
    std::vector<Dataset> subsets;
    std::unordered_map<std::uint64_t, int> origin;

    int subset_of(std::uint64_t id) const {
        auto it = origin.find(id);
        return it == origin.end() ? -1 : it->second;
    }
};

struct AugmentParams {
    bool horizontal_flip = false;
    double width_shift = 0.0;   // fraction of width
    double height_shift = 0.0;  // fraction of height
    double rotation_deg = 0.0;  // max magnitude, degrees
    double zoom = 0.0;          // fraction around 1.0

    void validate() const;
};

enum class FileFormat { csv, cifar_binary };

struct DatasetSchema {
    Shape shape;
    int num_classes = 0;
};

// Stratified round-robin split into n disjoint subsets. Class groups are
// shuffled with `seed`, then dealt to subsets through one rotating cursor so
// subset sizes stay within one of each other and per-class histograms stay
// within one of the stratified ideal.
Partition partition_disjoint(const Dataset& d, int n, std::uint64_t seed);

// Keras-style random augmentation: each call draws a flip decision, shifts,
// a rotation angle and a zoom factor uniformly inside the configured ranges.
// Identity parameters reproduce the sample exactly.
Sample augment(const Sample& s, const AugmentParams& p, std::uint64_t seed);

// Deterministic manipulation primitives shared by augmentation and the
// query-manipulation attacks. All keep shape and label, clamp to [0,255],
// interpolate bilinearly and fill out-of-frame reads by edge replication.
Image flip_horizontal(const Image& img);
Image rotate_bilinear(const Image& img, double degrees);
Image zoom_bilinear(const Image& img, double factor);
Image translate_edge(const Image& img, int dh, int dw);
Image brighten(const Image& img, int delta);
Image poke_pixel(const Image& img, int h, int w, int c, std::uint8_t value);

// Class-conditional synthetic images: each class gets a smooth low-frequency
// pattern; each sample adds its own smooth field plus pixel noise. Noise
// amplitude scales with 1/(1+separation), so higher separation means more
// attainable accuracy and separation = infinity means noise-free patterns.
Dataset generate_synthetic(int num_classes, int per_class, const Shape& shape,
                           double separation, std::uint64_t seed);

Dataset load_dataset(const std::string& path, FileFormat format, const DatasetSchema& schema);
void save_dataset(const Dataset& d, const std::string& path, FileFormat format);

// Deterministic stratified sub-split: moves roughly `fraction` of each class
// into the first dataset, the rest into the second. Ids are preserved.
std::pair<Dataset, Dataset> split_stratified(const Dataset& d, double fraction, std::uint64_t seed);

Mat flatten_scaled(const Dataset& d);     // rows = samples, pixels / 255
Vec flatten_scaled(const Image& img);

}  // namespace recusal
