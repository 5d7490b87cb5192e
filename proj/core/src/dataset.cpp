#include "ccs/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ccs/errors.hpp"
#include "ccs/rng.hpp"

namespace ccs {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw FormatError("truncated header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img = open_binary(images_path);
    const std::uint32_t img_magic = read_u32_be(img, images_path);
    if (img_magic != kImageMagic)
        throw FormatError("bad image magic in " + images_path + ": expected " +
                          hex32(kImageMagic) + ", got " + hex32(img_magic));
    const std::uint32_t count = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);

    std::ifstream lab = open_binary(labels_path);
    const std::uint32_t lab_magic = read_u32_be(lab, labels_path);
    if (lab_magic != kLabelMagic)
        throw FormatError("bad label magic in " + labels_path + ": expected " +
                          hex32(kLabelMagic) + ", got " + hex32(lab_magic));
    const std::uint32_t lab_count = read_u32_be(lab, labels_path);
    if (lab_count != count)
        throw FormatError("image/label count mismatch: " + std::to_string(count) +
                          " images vs " + std::to_string(lab_count) + " labels");

    const std::int64_t dim = std::int64_t(rows) * cols;
    Dataset ds;
    ds.inputs.resize(dim, count);

    std::vector<unsigned char> pix(static_cast<std::size_t>(dim));
    for (std::uint32_t i = 0; i < count; ++i) {
        img.read(reinterpret_cast<char*>(pix.data()), dim);
        if (!img) throw FormatError("truncated image data in " + images_path +
                                    " at sample " + std::to_string(i));
        for (std::int64_t p = 0; p < dim; ++p)
            ds.inputs(p, i) = double(pix[static_cast<std::size_t>(p)]) / 255.0 - 0.5;
    }

    ds.labels.resize(count);
    int max_label = -1;
    for (std::uint32_t i = 0; i < count; ++i) {
        unsigned char b;
        lab.read(reinterpret_cast<char*>(&b), 1);
        if (!lab) throw FormatError("truncated label data in " + labels_path +
                                    " at sample " + std::to_string(i));
        ds.labels[i] = b;
        max_label = std::max(max_label, int(b));
    }
    ds.n_classes = max_label + 1;
    return ds;
}

Dataset subset(const Dataset& data, std::int64_t n, std::uint64_t seed, bool stratified) {
    const std::int64_t total = data.size();
    if (n > total)
        throw ArgumentError("subset size " + std::to_string(n) + " exceeds dataset size " +
                            std::to_string(total));
    if (n < 0) throw ArgumentError("subset size must be non-negative");

    std::vector<std::int64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(n));
    auto rng = make_rng(derive_seed(seed, 0x5b5e7ull));

    if (stratified && data.n_classes > 0 && n >= data.n_classes) {
        std::vector<std::vector<std::int64_t>> by_class(static_cast<std::size_t>(data.n_classes));
        for (std::int64_t i = 0; i < total; ++i)
            by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);

        // Proportional allocation by largest remainder; every non-empty class
        // keeps at least one slot.
        const int k = data.n_classes;
        std::vector<std::int64_t> quota(static_cast<std::size_t>(k), 0);
        std::vector<std::pair<double, int>> rema;
        std::int64_t assigned = 0;
        for (int c = 0; c < k; ++c) {
            const auto sz = static_cast<std::int64_t>(by_class[static_cast<std::size_t>(c)].size());
            if (sz == 0) continue;
            const double share = double(n) * double(sz) / double(total);
            quota[static_cast<std::size_t>(c)] = std::max<std::int64_t>(1, std::int64_t(share));
            quota[static_cast<std::size_t>(c)] = std::min(quota[static_cast<std::size_t>(c)], sz);
            assigned += quota[static_cast<std::size_t>(c)];
            rema.emplace_back(share - double(std::int64_t(share)), c);
        }
        // Distribute leftovers by largest fractional share (ties: lower class).
        std::stable_sort(rema.begin(), rema.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::size_t r = 0;
        while (assigned < n && !rema.empty()) {
            const int c = rema[r % rema.size()].second;
            const auto sz = static_cast<std::int64_t>(by_class[static_cast<std::size_t>(c)].size());
            if (quota[static_cast<std::size_t>(c)] < sz) {
                ++quota[static_cast<std::size_t>(c)];
                ++assigned;
            }
            ++r;
            if (r > rema.size() * static_cast<std::size_t>(n + 1)) break;  // all classes exhausted
        }
        while (assigned > n) {  // possible when the 1-per-class floor overshoots
            // shrink the largest quota (ties: higher class index shrinks first)
            int arg = -1;
            for (int c = 0; c < k; ++c)
                if (quota[static_cast<std::size_t>(c)] > 1 &&
                    (arg < 0 || quota[static_cast<std::size_t>(c)] >= quota[static_cast<std::size_t>(arg)]))
                    arg = c;
            if (arg < 0) break;
            --quota[static_cast<std::size_t>(arg)];
            --assigned;
        }

        for (int c = 0; c < k; ++c) {
            auto& idx = by_class[static_cast<std::size_t>(c)];
            if (idx.empty()) continue;
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::int64_t j = 0; j < quota[static_cast<std::size_t>(c)]; ++j)
                chosen.push_back(idx[static_cast<std::size_t>(j)]);
        }
        std::shuffle(chosen.begin(), chosen.end(), rng);
    } else {
        std::vector<std::int64_t> idx(static_cast<std::size_t>(total));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        chosen.assign(idx.begin(), idx.begin() + n);
    }

    Dataset out;
    out.n_classes = data.n_classes;
    out.inputs.resize(data.inputs.rows(), static_cast<std::int64_t>(chosen.size()));
    out.labels.resize(chosen.size());
    for (std::size_t j = 0; j < chosen.size(); ++j) {
        out.inputs.col(static_cast<std::int64_t>(j)) = data.inputs.col(chosen[j]);
        out.labels[j] = data.labels[static_cast<std::size_t>(chosen[j])];
    }
    return out;
}

namespace {

constexpr char kCacheMagic[4] = {'D', 'S', 'B', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated dataset cache " + path);
    return v;
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kCacheMagic, 4);
    write_pod<std::uint32_t>(out, 1);  // version
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(data.inputs.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(data.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(data.n_classes));
    for (int lab : data.labels) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(lab));
    out.write(reinterpret_cast<const char*>(data.inputs.data()),
              static_cast<std::streamsize>(sizeof(double)) * data.inputs.size());
    if (!out) throw IoError("write failure on " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCacheMagic, 4) != 0)
        throw FormatError("bad dataset cache magic in " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != 1)
        throw FormatError("unsupported dataset cache version " + std::to_string(version));
    const auto dim = read_pod<std::uint32_t>(in, path);
    const auto count = read_pod<std::uint64_t>(in, path);
    const auto n_classes = read_pod<std::uint32_t>(in, path);

    Dataset ds;
    ds.n_classes = static_cast<int>(n_classes);
    ds.labels.resize(count);
    for (std::uint64_t i = 0; i < count; ++i)
        ds.labels[i] = static_cast<int>(read_pod<std::uint32_t>(in, path));
    ds.inputs.resize(dim, static_cast<std::int64_t>(count));
    in.read(reinterpret_cast<char*>(ds.inputs.data()),
            static_cast<std::streamsize>(sizeof(double)) * ds.inputs.size());
    if (!in) throw FormatError("truncated dataset cache " + path);
    return ds;
}

}  // namespace ccs
