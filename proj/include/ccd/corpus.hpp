#pragma once

#include "ccd/render.hpp"
#include "ccd/split.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace ccd {

/// A fully rendered factor-product corpus held in memory.
class Corpus {
public:
    explicit Corpus(FactorSpace space) : space_(std::move(space)) {
        const std::size_t n = space_.size();
        samples_.reserve(n);
        for (std::size_t ord = 0; ord < n; ++ord)
            samples_.push_back(render(space_, space_.ordinal_to_index(ord)));
    }

    Corpus(FactorSpace space, std::vector<Sample> samples)
        : space_(std::move(space)), samples_(std::move(samples)) {}

    const FactorSpace& space() const { return space_; }
    std::size_t size() const { return samples_.size(); }
    const Sample& sample(std::size_t ordinal) const { return samples_.at(ordinal); }

private:
    FactorSpace space_;
    std::vector<Sample> samples_;
};

namespace io {

using nlohmann::json;

inline json factor_space_to_json(const FactorSpace& s) {
    json jf = json::array();
    for (const auto& f : s.factors) {
        json j{{"name", f.name},
               {"kind", f.kind == FactorKind::Categorical ? "categorical" : "continuous"},
               {"values", f.values},
               {"lo", f.lo},
               {"hi", f.hi}};
        if (!f.category_labels.empty()) j["category_labels"] = f.category_labels;
        jf.push_back(j);
    }
    return json{{"dataset_name", s.dataset_name},
                {"image_h", s.image_h},
                {"image_w", s.image_w},
                {"image_c", s.image_c},
                {"factors", jf}};
}

inline FactorSpace factor_space_from_json(const json& j) {
    FactorSpace s;
    s.dataset_name = j.at("dataset_name").get<std::string>();
    s.image_h = j.at("image_h").get<int>();
    s.image_w = j.at("image_w").get<int>();
    s.image_c = j.at("image_c").get<int>();
    for (const auto& jf : j.at("factors")) {
        FactorSpec f;
        f.name = jf.at("name").get<std::string>();
        f.kind = jf.at("kind").get<std::string>() == "categorical" ? FactorKind::Categorical
                                                                   : FactorKind::Continuous;
        f.values = jf.at("values").get<std::vector<double>>();
        f.lo = jf.at("lo").get<double>();
        f.hi = jf.at("hi").get<double>();
        if (jf.contains("category_labels"))
            f.category_labels = jf.at("category_labels").get<std::vector<std::string>>();
        f.validate();
        s.factors.push_back(std::move(f));
    }
    return s;
}

/// On-disk corpus layout:
///   factors.json  - factor space description
///   images.json   - {"shape":[N,H,W,C],"dtype":"float32","order":"C"}
///   images.bin    - raw little-endian float32, N*H*W*C values, row-major
///   labels.csv    - ordinal, per-factor grid index, per-factor normalized u
///   split.json    - train/test ordinals (written by generate-data)
inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const FactorSpace& s = corpus.space();

    std::ofstream(dir / "factors.json") << factor_space_to_json(s).dump(2) << "\n";

    const std::size_t n = corpus.size();
    json header{{"shape", {n, s.image_h, s.image_w, s.image_c}},
                {"dtype", "float32"},
                {"order", "C"}};
    std::ofstream(dir / "images.json") << header.dump(2) << "\n";

    std::ofstream bin(dir / "images.bin", std::ios::binary);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& img = corpus.sample(i).image;
        bin.write(reinterpret_cast<const char*>(img.data()),
                  static_cast<std::streamsize>(img.size() * sizeof(float)));
    }

    std::ofstream csv(dir / "labels.csv");
    csv << "ordinal";
    for (const auto& f : s.factors) csv << ",idx_" << f.name;
    for (const auto& f : s.factors) csv << ",u_" << f.name;
    csv << "\n";
    csv.precision(17);
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& smp = corpus.sample(i);
        csv << i;
        for (std::size_t f = 0; f < s.m(); ++f) csv << "," << smp.factor_index[f];
        for (Eigen::Index f = 0; f < smp.u.size(); ++f) csv << "," << smp.u(f);
        csv << "\n";
    }
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    json jf;
    {
        std::ifstream in(dir / "factors.json");
        if (!in) throw config_error("corpus not found at " + dir.string());
        in >> jf;
    }
    FactorSpace space = factor_space_from_json(jf);

    json jh;
    std::ifstream(dir / "images.json") >> jh;
    const auto shape = jh.at("shape").get<std::vector<std::size_t>>();
    const std::size_t n = shape[0];
    const std::size_t per = shape[1] * shape[2] * shape[3];
    if (n != space.size()) throw config_error("corpus image count does not match factor space");

    std::ifstream bin(dir / "images.bin", std::ios::binary);
    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::size_t ord = 0; ord < n; ++ord) {
        Sample s;
        s.h = static_cast<int>(shape[1]);
        s.w = static_cast<int>(shape[2]);
        s.c = static_cast<int>(shape[3]);
        s.image.resize(per);
        bin.read(reinterpret_cast<char*>(s.image.data()),
                 static_cast<std::streamsize>(per * sizeof(float)));
        if (!bin) throw config_error("images.bin truncated");
        s.factor_index = space.ordinal_to_index(ord);
        s.u = space.normalized_labels(s.factor_index);
        samples.push_back(std::move(s));
    }
    return Corpus(std::move(space), std::move(samples));
}

inline void save_split(const DatasetSplit& split, const std::filesystem::path& file) {
    json j{{"train_indices", split.train_indices},
           {"test_indices", split.test_indices},
           {"stratify_on", split.stratify_on},
           {"ratio", split.ratio},
           {"seed", split.seed}};
    std::ofstream(file) << j.dump() << "\n";
}

inline DatasetSplit load_split(const std::filesystem::path& file) {
    json j;
    std::ifstream in(file);
    if (!in) throw config_error("split file not found: " + file.string());
    in >> j;
    DatasetSplit s;
    s.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
    s.test_indices = j.at("test_indices").get<std::vector<std::size_t>>();
    s.stratify_on = j.at("stratify_on").get<std::vector<std::string>>();
    s.ratio = j.at("ratio").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

/// Default stratification factors used by the paper-style splits.
inline std::vector<std::string> default_stratify(const std::string& dataset_name) {
    if (dataset_name == "dsprites_like") return {"shape", "posX", "posY"};
    if (dataset_name == "shapes3d_like")
        return {"floor_hue", "wall_hue", "object_hue", "shape"};
    throw config_error("unknown dataset_name: " + dataset_name);
}

}  // namespace io
}  // namespace ccd
