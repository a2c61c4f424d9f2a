#include "woundstage/datapipe.hpp"

#include <algorithm>
#include <fstream>

namespace woundstage {

namespace {
const std::array<std::string, kNumStages> kStageNames = {
    "Control", "Day0", "Day3", "Day7", "Day10", "DelayDay10",
};
}

const std::string& stage_name(StageLabel label) {
    int i = static_cast<int>(label);
    if (i < 0 || i >= kNumStages) throw UsageError("invalid stage label value");
    return kStageNames[static_cast<std::size_t>(i)];
}

std::optional<StageLabel> stage_from_name(const std::string& name) {
    for (int i = 0; i < kNumStages; ++i)
        if (kStageNames[static_cast<std::size_t>(i)] == name) return static_cast<StageLabel>(i);
    return std::nullopt;
}

std::array<int, kNumStages> Manifest::class_counts() const {
    std::array<int, kNumStages> counts{};
    for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
    return counts;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest is empty: " + path.string());
    if (strip_cr(line) != "path,label,dataset_id")
        throw DataError("manifest " + path.string() + " must start with 'path,label,dataset_id'");

    Manifest m;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw DataError("manifest " + path.string() + " line " + std::to_string(lineno) +
                            ": expected 3 fields, got " + std::to_string(fields.size()));
        auto label = stage_from_name(fields[1]);
        if (!label)
            throw DataError("manifest " + path.string() + " line " + std::to_string(lineno) +
                            ": unknown label '" + fields[1] + "'");
        int dataset_id = 0;
        try {
            std::size_t used = 0;
            dataset_id = std::stoi(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DataError("manifest " + path.string() + " line " + std::to_string(lineno) +
                            ": bad dataset_id '" + fields[2] + "'");
        }
        if (fields[0].empty())
            throw DataError("manifest " + path.string() + " line " + std::to_string(lineno) +
                            ": empty path");
        m.samples.push_back(Sample{fields[0], *label, dataset_id});
    }
    return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << "path,label,dataset_id\n";
    for (const auto& s : manifest.samples) {
        if (s.image_path.find(',') != std::string::npos)
            throw DataError("manifest paths must not contain commas: " + s.image_path);
        out << s.image_path << ',' << stage_name(s.label) << ',' << s.dataset_id << '\n';
    }
    if (!out) throw DataError("manifest write failed: " + path.string());
}

std::array<int, 3> split_counts(int n, const std::array<int, 3>& ratios) {
    if (n < 0) throw UsageError("split_counts: negative sample count");
    long long sum = 0;
    for (int r : ratios) {
        if (r < 0) throw UsageError("split_counts: ratios must be non-negative");
        sum += r;
    }
    if (sum == 0) throw UsageError("split_counts: ratios sum to zero");
    long long train = (static_cast<long long>(n) * ratios[0] + sum - 1) / sum;  // ceil
    long long val = (static_cast<long long>(n) * ratios[1] + sum - 1) / sum;    // ceil
    val = std::min(val, static_cast<long long>(n) - train);
    long long test = n - train - val;
    return {static_cast<int>(train), static_cast<int>(val), static_cast<int>(test)};
}

SplitResult stratified_split(const Manifest& manifest, const std::array<int, 3>& ratios,
                             std::uint64_t seed) {
    SplitResult out;
    Rng rng(seed);
    for (int c = 0; c < kNumStages; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < manifest.samples.size(); ++i)
            if (static_cast<int>(manifest.samples[i].label) == c) idx.push_back(i);
        Rng class_rng = rng.fork(static_cast<std::uint64_t>(c));
        class_rng.shuffle(idx);
        auto counts = split_counts(static_cast<int>(idx.size()), ratios);
        std::size_t pos = 0;
        for (int k = 0; k < counts[0]; ++k) out.train.samples.push_back(manifest.samples[idx[pos++]]);
        for (int k = 0; k < counts[1]; ++k)
            out.validation.samples.push_back(manifest.samples[idx[pos++]]);
        for (int k = 0; k < counts[2]; ++k) out.test.samples.push_back(manifest.samples[idx[pos++]]);
    }
    return out;
}

std::vector<ImageU8> augment12(const ImageU8& img) {
    std::vector<ImageU8> out;
    out.reserve(12);
    ImageU8 rots[4] = {img, rotate90(img), rotate180(img), rotate270(img)};
    for (const auto& r : rots) {
        out.push_back(r);
        out.push_back(flip_horizontal(r));
        out.push_back(flip_vertical(r));
    }
    return out;
}

template <typename T>
std::vector<T> normalize_chw(const ImageU8& img, const NormalizeConstants& k) {
    std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
    std::vector<T> out(plane * 3);
    for (int c = 0; c < 3; ++c) {
        double mean = k.mean[static_cast<std::size_t>(c)];
        double inv_std = 1.0 / k.stdev[static_cast<std::size_t>(c)];
        T* dst = out.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
            dst[i] = static_cast<T>((img.pixels[i * 3 + static_cast<std::size_t>(c)] / 255.0 - mean) *
                                    inv_std);
    }
    return out;
}

Dataset load_dataset(const Manifest& manifest, int input_size, const NormalizeConstants& k,
                     const std::filesystem::path& base_dir) {
    if (input_size <= 0) throw UsageError("load_dataset: input_size must be positive");
    Dataset ds;
    ds.height = ds.width = input_size;
    ds.inputs.reserve(manifest.samples.size());
    ds.labels.reserve(manifest.samples.size());
    for (const auto& s : manifest.samples) {
        std::filesystem::path p(s.image_path);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        ImageU8 img = read_png(p);
        img = resize_bilinear(img, input_size, input_size);
        ds.inputs.push_back(normalize_chw<float>(img, k));
        ds.labels.push_back(static_cast<int>(s.label));
    }
    return ds;
}

template std::vector<float> normalize_chw<float>(const ImageU8&, const NormalizeConstants&);
template std::vector<double> normalize_chw<double>(const ImageU8&, const NormalizeConstants&);

}  // namespace woundstage
