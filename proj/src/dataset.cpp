#include "recusal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace recusal {

void Shape::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0)
        throw ValidationError("shape dimensions must be positive, got " + std::to_string(height) +
                              "x" + std::to_string(width) + "x" + std::to_string(channels));
}

void Dataset::validate() const {
    shape.validate();
    if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(samples.size());
    for (const Sample& s : samples) {
        if (!(s.image.shape == shape))
            throw ValidationError("sample " + std::to_string(s.id) + " shape mismatch");
        if (s.image.pixels.size() != static_cast<std::size_t>(shape.pixel_count()))
            throw ValidationError("sample " + std::to_string(s.id) + " pixel count mismatch");
        if (s.label < 0 || s.label >= num_classes)
            throw ValidationError("sample " + std::to_string(s.id) + " label out of range");
        if (!seen.insert(s.id).second)
            throw ValidationError("duplicate sample id " + std::to_string(s.id));
    }
}

void AugmentParams::validate() const {
    if (width_shift < 0 || width_shift > 1 || height_shift < 0 || height_shift > 1)
        throw ValidationError("shift fractions must lie in [0,1]");
    if (rotation_deg < 0 || rotation_deg > 180)
        throw ValidationError("rotation_deg must lie in [0,180]");
    if (zoom < 0 || zoom >= 1)
        throw ValidationError("zoom must lie in [0,1)");
}

Partition partition_disjoint(const Dataset& d, int n, std::uint64_t seed) {
    d.validate();
    if (n < 2) throw ValidationError("partition needs n >= 2");
    if (static_cast<std::size_t>(n) > d.size())
        throw ValidationError("partition needs n <= dataset size");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.num_classes));
    for (std::size_t i = 0; i < d.size(); ++i)
        by_class[static_cast<std::size_t>(d.samples[i].label)].push_back(i);

    Rng rng(seed);
    Partition p;
    p.subsets.assign(static_cast<std::size_t>(n), Dataset{{}, d.shape, d.num_classes});
    std::size_t cursor = 0;
    for (auto& group : by_class) {
        std::shuffle(group.begin(), group.end(), rng);
        for (std::size_t idx : group) {
            int target = static_cast<int>(cursor % static_cast<std::size_t>(n));
            p.subsets[static_cast<std::size_t>(target)].samples.push_back(d.samples[idx]);
            p.origin.emplace(d.samples[idx].id, target);
            ++cursor;
        }
    }
    return p;
}

namespace {

double bilinear_at(const Image& img, double y, double x, int c) {
    const int h = img.shape.height, w = img.shape.width;
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = y - y0, fx = x - x0;
    const double v00 = img.at(y0, x0, c), v01 = img.at(y0, x1, c);
    const double v10 = img.at(y1, x0, c), v11 = img.at(y1, x1, c);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

std::uint8_t to_pixel(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Samples the source image under the inverse map dst -> src applied about the
// image center, with edge replication outside the frame.
template <typename MapFn>
Image affine_sample(const Image& img, MapFn&& dst_to_src) {
    Image out{img.shape, std::vector<std::uint8_t>(img.pixels.size())};
    const double cy = (img.shape.height - 1) / 2.0;
    const double cx = (img.shape.width - 1) / 2.0;
    for (int h = 0; h < img.shape.height; ++h) {
        for (int w = 0; w < img.shape.width; ++w) {
            auto [sy, sx] = dst_to_src(h - cy, w - cx);
            for (int c = 0; c < img.shape.channels; ++c)
                out.at(h, w, c) = to_pixel(bilinear_at(img, sy + cy, sx + cx, c));
        }
    }
    return out;
}

struct AffineOps {
    bool flip = false;
    double rot_deg = 0.0;
    double zoom = 1.0;
    double shift_h = 0.0;  // pixels, content moves down
    double shift_w = 0.0;  // pixels, content moves right
};

Image apply_affine(const Image& img, const AffineOps& ops) {
    const double theta = ops.rot_deg * std::numbers::pi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    return affine_sample(img, [&](double dy, double dx) {
        dy -= ops.shift_h;
        dx -= ops.shift_w;
        double ry = (ct * dy - st * dx) / ops.zoom;
        double rx = (st * dy + ct * dx) / ops.zoom;
        if (ops.flip) rx = -rx;
        return std::pair<double, double>(ry, rx);
    });
}

}  // namespace

Image flip_horizontal(const Image& img) {
    Image out{img.shape, std::vector<std::uint8_t>(img.pixels.size())};
    for (int h = 0; h < img.shape.height; ++h)
        for (int w = 0; w < img.shape.width; ++w)
            for (int c = 0; c < img.shape.channels; ++c)
                out.at(h, w, c) = img.at(h, img.shape.width - 1 - w, c);
    return out;
}

Image rotate_bilinear(const Image& img, double degrees) {
    return apply_affine(img, {.rot_deg = degrees});
}

Image zoom_bilinear(const Image& img, double factor) {
    if (factor <= 0) throw ValidationError("zoom factor must be positive");
    return apply_affine(img, {.zoom = factor});
}

Image translate_edge(const Image& img, int dh, int dw) {
    Image out{img.shape, std::vector<std::uint8_t>(img.pixels.size())};
    for (int h = 0; h < img.shape.height; ++h) {
        const int sh = std::clamp(h - dh, 0, img.shape.height - 1);
        for (int w = 0; w < img.shape.width; ++w) {
            const int sw = std::clamp(w - dw, 0, img.shape.width - 1);
            for (int c = 0; c < img.shape.channels; ++c) out.at(h, w, c) = img.at(sh, sw, c);
        }
    }
    return out;
}

Image brighten(const Image& img, int delta) {
    Image out = img;
    for (auto& p : out.pixels) p = to_pixel(static_cast<double>(p) + delta);
    return out;
}

Image poke_pixel(const Image& img, int h, int w, int c, std::uint8_t value) {
    if (h < 0 || h >= img.shape.height || w < 0 || w >= img.shape.width || c < 0 ||
        c >= img.shape.channels)
        throw ValidationError("poke_pixel coordinates out of range");
    Image out = img;
    out.at(h, w, c) = value;
    return out;
}

Sample augment(const Sample& s, const AugmentParams& p, std::uint64_t seed) {
    p.validate();
    Rng rng(seed);
    AffineOps ops;
    ops.flip = std::bernoulli_distribution(p.horizontal_flip ? 0.5 : 0.0)(rng);
    ops.rot_deg = std::uniform_real_distribution<double>(-p.rotation_deg, p.rotation_deg)(rng);
    ops.zoom = std::uniform_real_distribution<double>(1.0 - p.zoom, 1.0 + p.zoom)(rng);
    ops.shift_w =
        std::uniform_real_distribution<double>(-p.width_shift, p.width_shift)(rng) * s.image.shape.width;
    ops.shift_h =
        std::uniform_real_distribution<double>(-p.height_shift, p.height_shift)(rng) * s.image.shape.height;
    return Sample{apply_affine(s.image, ops), s.label, s.id};
}

namespace {

// Sum of low-frequency cosine modes evaluated on the pixel grid.
struct CosineField {
    struct Mode {
        int fh, fw;
        double phase_h, phase_w, amp;

        double basis(int h, int w, const Shape& shape) const {
            const double a = std::cos(std::numbers::pi * fh * (h + 0.5) / shape.height + phase_h);
            const double b = std::cos(std::numbers::pi * fw * (w + 0.5) / shape.width + phase_w);
            return a * b;
        }
    };
    std::vector<Mode> modes;

    double eval(int h, int w, const Shape& shape) const {
        double v = 0;
        for (const Mode& m : modes) v += m.amp * m.basis(h, w, shape);
        return v;
    }

    std::vector<Mat> basis_grids(const Shape& shape) const {
        std::vector<Mat> grids;
        grids.reserve(modes.size());
        for (const Mode& m : modes) {
            Mat g(shape.height, shape.width);
            for (int h = 0; h < shape.height; ++h)
                for (int w = 0; w < shape.width; ++w) g(h, w) = m.basis(h, w, shape);
            grids.push_back(std::move(g));
        }
        return grids;
    }
};

CosineField draw_field(Rng& rng, int n_modes, int max_freq, double amp_lo, double amp_hi,
                       bool signed_amp) {
    std::uniform_int_distribution<int> freq(0, max_freq);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
    CosineField f;
    f.modes.resize(static_cast<std::size_t>(n_modes));
    for (auto& m : f.modes) {
        do {
            m.fh = freq(rng);
            m.fw = freq(rng);
        } while (m.fh == 0 && m.fw == 0);
        m.phase_h = phase(rng);
        m.phase_w = phase(rng);
        m.amp = amp(rng);
        if (signed_amp && std::bernoulli_distribution(0.5)(rng)) m.amp = -m.amp;
    }
    return f;
}

}  // namespace

Dataset generate_synthetic(int num_classes, int per_class, const Shape& shape, double separation,
                           std::uint64_t seed) {
    shape.validate();
    if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
    if (per_class < 1) throw ValidationError("per_class must be >= 1");
    if (std::isnan(separation) || separation < 0)
        throw ValidationError("separation must be >= 0");

    // Class identity lives in the coefficients of a small shared bank of
    // low-frequency modes, so the learnable signal is low-dimensional and the
    // coefficient noise controls class overlap. Each sample additionally gets
    // its own random-support smooth field, which makes samples perceptually
    // distinct without carrying label information. Every noise source scales
    // with 1/(1+separation), so separation = infinity degenerates to exact
    // per-class patterns.
    constexpr int kSignalModes = 6;
    constexpr int kDistractorModes = 10;
    const double nu = 1.0 / (1.0 + separation);
    const double sigma_signal = 55.0 * nu;      // coefficient noise on signal modes
    const double sigma_distract = 40.0 * nu;    // per-sample smooth variation
    const double sigma_pixel = 16.0 * nu;       // iid texture noise

    Rng rng(seed);
    CosineField signal_bank = draw_field(rng, kSignalModes, 5, 1.0, 1.0, false);
    std::uniform_real_distribution<double> gain(0.5, 1.0);
    std::bernoulli_distribution coin(0.5);
    Mat signal_gain(kSignalModes, shape.channels);
    for (Eigen::Index m = 0; m < signal_gain.rows(); ++m)
        for (int c = 0; c < shape.channels; ++c)
            signal_gain(m, c) = gain(rng) * (coin(rng) ? 1.0 : -1.0);

    std::uniform_real_distribution<double> theta(-45.0, 45.0);
    Mat class_coeff(kSignalModes, num_classes);
    for (int k = 0; k < num_classes; ++k)
        for (int m = 0; m < kSignalModes; ++m) class_coeff(m, k) = theta(rng);

    std::normal_distribution<double> signal_noise(0.0, sigma_signal);
    std::normal_distribution<double> distract_noise(0.0, sigma_distract);
    std::normal_distribution<double> pixel_noise(0.0, sigma_pixel);

    const std::vector<Mat> sig_basis = signal_bank.basis_grids(shape);

    Dataset d{{}, shape, num_classes};
    const int total = num_classes * per_class;
    d.samples.reserve(static_cast<std::size_t>(total));
    Vec coeff(kSignalModes);
    Mat field(shape.height, shape.width);
    for (int i = 0; i < total; ++i) {
        const int label = i % num_classes;
        Sample s{{shape, std::vector<std::uint8_t>(static_cast<std::size_t>(shape.pixel_count()))},
                 label,
                 static_cast<std::uint64_t>(i)};
        for (int m = 0; m < kSignalModes; ++m) coeff(m) = class_coeff(m, label) + signal_noise(rng);
        for (int c = 0; c < shape.channels; ++c) {
            field.setConstant(128.0);
            for (int m = 0; m < kSignalModes; ++m)
                field += coeff(m) * signal_gain(m, c) * sig_basis[static_cast<std::size_t>(m)];
            CosineField distract = draw_field(rng, kDistractorModes, 7, 0.0, 0.0, false);
            for (auto& m : distract.modes) m.amp = distract_noise(rng);
            for (int h = 0; h < shape.height; ++h)
                for (int w = 0; w < shape.width; ++w)
                    s.image.at(h, w, c) = to_pixel(field(h, w) + distract.eval(h, w, shape) +
                                                   pixel_noise(rng));
        }
        d.samples.push_back(std::move(s));
    }
    return d;
}

namespace {

int parse_int(std::string_view cell, const std::string& where, int lo, int hi) {
    int value = 0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(where + ": not an integer: '" + std::string(cell) + "'");
    if (value < lo || value > hi)
        throw ParseError(where + ": value " + std::to_string(value) + " outside [" +
                         std::to_string(lo) + "," + std::to_string(hi) + "]");
    return value;
}

Dataset load_csv(const std::string& path, const DatasetSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    const int pix = schema.shape.pixel_count();

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (line.rfind("label", 0) != 0) throw ParseError(path + ": line 1: missing label header");

    Dataset d{{}, schema.shape, schema.num_classes};
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ": line " + std::to_string(line_no);
        Sample s{{schema.shape, {}}, 0, d.samples.size()};
        s.image.pixels.reserve(static_cast<std::size_t>(pix));
        std::size_t start = 0, field = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) comma = line.size();
            std::string_view cell(line.data() + start, comma - start);
            if (field == 0) {
                s.label = parse_int(cell, where, 0, schema.num_classes - 1);
            } else {
                if (field > static_cast<std::size_t>(pix))
                    throw ParseError(where + ": too many pixel columns");
                s.image.pixels.push_back(
                    static_cast<std::uint8_t>(parse_int(cell, where, 0, 255)));
            }
            ++field;
            start = comma + 1;
            if (comma == line.size()) break;
        }
        if (field != static_cast<std::size_t>(pix) + 1)
            throw ParseError(where + ": expected " + std::to_string(pix + 1) + " columns, got " +
                             std::to_string(field));
        d.samples.push_back(std::move(s));
    }
    return d;
}

void save_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "label";
    for (int i = 0; i < d.shape.pixel_count(); ++i) out << ",p" << i;
    out << '\n';
    for (const Sample& s : d.samples) {
        out << s.label;
        for (std::uint8_t p : s.image.pixels) out << ',' << static_cast<int>(p);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

// One record per sample: a label byte followed by channel-planar pixel bytes.
Dataset load_cifar_binary(const std::string& path, const DatasetSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t pix = static_cast<std::size_t>(schema.shape.pixel_count());
    const std::size_t record = 1 + pix;
    if (bytes.size() % record != 0)
        throw ParseError(path + ": size " + std::to_string(bytes.size()) +
                         " is not a multiple of record size " + std::to_string(record));

    Dataset d{{}, schema.shape, schema.num_classes};
    const Shape& sh = schema.shape;
    for (std::size_t r = 0; r * record < bytes.size(); ++r) {
        const std::uint8_t* rec = reinterpret_cast<const std::uint8_t*>(bytes.data()) + r * record;
        const std::string where = path + ": record " + std::to_string(r);
        if (rec[0] >= schema.num_classes)
            throw ParseError(where + ": label " + std::to_string(rec[0]) + " out of range");
        Sample s{{sh, std::vector<std::uint8_t>(pix)}, rec[0], r};
        std::size_t k = 1;
        for (int c = 0; c < sh.channels; ++c)
            for (int h = 0; h < sh.height; ++h)
                for (int w = 0; w < sh.width; ++w) s.image.at(h, w, c) = rec[k++];
        d.samples.push_back(std::move(s));
    }
    return d;
}

void save_cifar_binary(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (const Sample& s : d.samples) {
        if (s.label > 255) throw IoError("label exceeds one byte");
        out.put(static_cast<char>(s.label));
        for (int c = 0; c < d.shape.channels; ++c)
            for (int h = 0; h < d.shape.height; ++h)
                for (int w = 0; w < d.shape.width; ++w)
                    out.put(static_cast<char>(s.image.at(h, w, c)));
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace

Dataset load_dataset(const std::string& path, FileFormat format, const DatasetSchema& schema) {
    schema.shape.validate();
    if (schema.num_classes < 1) throw ValidationError("schema num_classes must be >= 1");
    Dataset d = format == FileFormat::csv ? load_csv(path, schema) : load_cifar_binary(path, schema);
    d.validate();
    return d;
}

void save_dataset(const Dataset& d, const std::string& path, FileFormat format) {
    d.validate();
    if (format == FileFormat::csv)
        save_csv(d, path);
    else
        save_cifar_binary(d, path);
}

std::pair<Dataset, Dataset> split_stratified(const Dataset& d, double fraction, std::uint64_t seed) {
    d.validate();
    if (fraction < 0 || fraction > 1) throw ValidationError("fraction must lie in [0,1]");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.num_classes));
    for (std::size_t i = 0; i < d.size(); ++i)
        by_class[static_cast<std::size_t>(d.samples[i].label)].push_back(i);

    Rng rng(seed);
    std::vector<bool> in_first(d.size(), false);
    for (auto& group : by_class) {
        std::shuffle(group.begin(), group.end(), rng);
        const auto take = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(group.size())));
        for (std::size_t i = 0; i < take && i < group.size(); ++i) in_first[group[i]] = true;
    }
    std::pair<Dataset, Dataset> out{{{}, d.shape, d.num_classes}, {{}, d.shape, d.num_classes}};
    for (std::size_t i = 0; i < d.size(); ++i)
        (in_first[i] ? out.first : out.second).samples.push_back(d.samples[i]);
    return out;
}

Mat flatten_scaled(const Dataset& d) {
    const int pix = d.shape.pixel_count();
    Mat x(static_cast<Eigen::Index>(d.size()), pix);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (int j = 0; j < pix; ++j)
            x(static_cast<Eigen::Index>(i), j) = d.samples[i].image.pixels[static_cast<std::size_t>(j)] / 255.0;
    return x;
}

Vec flatten_scaled(const Image& img) {
    Vec x(img.shape.pixel_count());
    for (int j = 0; j < img.shape.pixel_count(); ++j)
        x(j) = img.pixels[static_cast<std::size_t>(j)] / 255.0;
    return x;
}

}  // namespace recusal
