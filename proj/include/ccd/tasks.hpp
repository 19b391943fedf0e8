#pragma once

#include "ccd/corpus.hpp"

#include <set>

namespace ccd {

enum class Comparator { EQ, LE, GE };

/// One conjunct of a task definition. EQ carries a category index and is
/// only valid on categorical factors; LE/GE carry a normalized threshold
/// in [0,1] and apply to the sample's normalized label u.
struct TaskCriterion {
    std::string factor;
    Comparator cmp = Comparator::EQ;
    double value = 0.0;
};

struct TaskSpec {
    std::string name;
    std::vector<TaskCriterion> criteria;

    std::set<std::string> relevant_factors() const {
        std::set<std::string> s;
        for (const auto& c : criteria) s.insert(c.factor);
        return s;
    }

    void validate(const FactorSpace& space) const {
        if (criteria.size() < 2 || criteria.size() > 3)
            throw config_error("task '" + name + "': needs 2 or 3 criteria");
        if (relevant_factors().size() != criteria.size())
            throw config_error("task '" + name + "': duplicate factor in criteria");
        for (const auto& c : criteria) {
            const auto& f = space.factors[static_cast<std::size_t>(
                space.factor_index_of(c.factor))];
            if (c.cmp == Comparator::EQ) {
                if (f.kind != FactorKind::Categorical)
                    throw config_error("task '" + name + "': EQ on continuous factor " +
                                       c.factor);
                if (c.value < 0 || c.value >= static_cast<double>(f.cardinality()))
                    throw config_error("task '" + name + "': category index out of range");
            } else {
                if (f.kind != FactorKind::Continuous)
                    throw config_error("task '" + name + "': threshold on categorical factor " +
                                       c.factor);
                if (c.value < 0.0 || c.value > 1.0)
                    throw config_error("task '" + name + "': threshold outside [0,1]");
            }
        }
    }
};

struct TaskDataset {
    TaskSpec task;
    std::vector<std::size_t> indices;  // corpus ordinals
    std::vector<int> labels;           // parallel to indices
};

/// Conjunction label: 1 iff every criterion holds. EQ tests the raw grid
/// category; LE/GE test the normalized label with a tiny tie tolerance.
inline int label(const TaskSpec& task, const FactorSpace& space, const Sample& sample) {
    constexpr double kEps = 1e-12;
    for (const auto& c : task.criteria) {
        const auto f = static_cast<std::size_t>(space.factor_index_of(c.factor));
        switch (c.cmp) {
            case Comparator::EQ:
                if (sample.factor_index[f] != static_cast<std::size_t>(c.value)) return 0;
                break;
            case Comparator::LE:
                if (!(sample.u(static_cast<Eigen::Index>(f)) <= c.value + kEps)) return 0;
                break;
            case Comparator::GE:
                if (!(sample.u(static_cast<Eigen::Index>(f)) >= c.value - kEps)) return 0;
                break;
        }
    }
    return 1;
}

struct TaskDatasetPair {
    TaskDataset train;
    TaskDataset test;
};

namespace detail {

inline TaskDataset balance_subset(const TaskSpec& task, const Corpus& corpus,
                                  const std::vector<std::size_t>& pool, Rng& rng) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t ord : pool)
        (label(task, corpus.space(), corpus.sample(ord)) ? pos : neg).push_back(ord);
    auto& majority = pos.size() > neg.size() ? pos : neg;
    const std::size_t target = std::min(pos.size(), neg.size());
    rng.shuffle(majority);
    majority.resize(target);

    TaskDataset ds;
    ds.task = task;
    for (std::size_t ord : pos) {
        ds.indices.push_back(ord);
        ds.labels.push_back(1);
    }
    for (std::size_t ord : neg) {
        ds.indices.push_back(ord);
        ds.labels.push_back(0);
    }
    return ds;
}

}  // namespace detail

/// Builds balanced train/test datasets by subsampling the majority class.
/// Throws task_too_small when fewer than `min_train_positives` positive
/// train samples exist.
inline TaskDatasetPair build_task_dataset(const TaskSpec& task, const Corpus& corpus,
                                          const DatasetSplit& split, std::uint64_t seed,
                                          std::size_t min_train_positives = 64) {
    task.validate(corpus.space());
    std::size_t train_pos = 0;
    for (std::size_t ord : split.train_indices)
        train_pos += static_cast<std::size_t>(label(task, corpus.space(), corpus.sample(ord)));
    if (train_pos < min_train_positives)
        throw task_too_small("task '" + task.name + "': " + std::to_string(train_pos) +
                             " train positives < " + std::to_string(min_train_positives));
    Rng rng(seed);
    TaskDatasetPair pair;
    pair.train = detail::balance_subset(task, corpus, split.train_indices, rng);
    pair.test = detail::balance_subset(task, corpus, split.test_indices, rng);
    return pair;
}

namespace detail {

/// Catalog thresholds are taken from the published task tables. Values
/// already inside [0,1] are used as normalized-u thresholds directly;
/// values outside are interpreted in the factor's native units, mapped
/// through its [lo,hi] range, and clamped into [0,1].
inline double catalog_threshold(const FactorSpace& space, const std::string& factor,
                                double printed) {
    if (printed >= 0.0 && printed <= 1.0) return printed;
    const auto& f =
        space.factors[static_cast<std::size_t>(space.factor_index_of(factor))];
    return clamp01((printed - f.lo) / (f.hi - f.lo));
}

}  // namespace detail

/// The fixed task catalogs: 9 dSprites-like tasks (6 two-factor plus
/// 3 three-factor), 12 Shapes3D-like tasks (6 + 6).
inline std::vector<TaskSpec> catalog(const std::string& dataset_name) {
    const FactorSpace space = build_factor_space(dataset_name, Resolution::Mini);
    auto thr = [&](const std::string& f, double printed) {
        return detail::catalog_threshold(space, f, printed);
    };
    std::vector<TaskSpec> tasks;
    if (dataset_name == "dsprites_like") {
        // shape categories are published 1-based: 1 square, 2 ellipse, 3 heart
        tasks = {
            {"left_hearts",
             {{"posX", Comparator::LE, 0.5}, {"shape", Comparator::EQ, 2}}},
            {"right_ellipses",
             {{"posX", Comparator::GE, 0.5}, {"shape", Comparator::EQ, 1}}},
            {"bottom_squares",
             {{"posY", Comparator::LE, 0.5}, {"shape", Comparator::EQ, 0}}},
            {"top_hearts",
             {{"posY", Comparator::GE, 0.5}, {"shape", Comparator::EQ, 2}}},
            {"big_right_rotated",
             {{"scale", Comparator::LE, 0.5}, {"orientation", Comparator::GE, thr("orientation", 3.0)}}},
            {"small_left_rotated",
             {{"scale", Comparator::LE, 0.5}, {"orientation", Comparator::LE, thr("orientation", 3.0)}}},
            {"top_big_hearts",
             {{"posY", Comparator::GE, 0.5},
              {"shape", Comparator::EQ, 2},
              {"scale", Comparator::GE, 0.7}}},
            {"left_small_squares",
             {{"posX", Comparator::GE, 0.5},
              {"shape", Comparator::EQ, 1},
              {"scale", Comparator::LE, 0.5}}},
            {"top_right_rotated",
             {{"posX", Comparator::GE, 0.5},
              {"orientation", Comparator::GE, thr("orientation", 3.0)},
              {"posY", Comparator::GE, 0.5}}},
        };
    } else if (dataset_name == "shapes3d_like") {
        tasks = {
            {"low_floor_low_wall",
             {{"floor_hue", Comparator::LE, 0.5}, {"wall_hue", Comparator::LE, 0.5}}},
            {"high_floor_low_object",
             {{"floor_hue", Comparator::GE, 0.5}, {"object_hue", Comparator::LE, 0.5}}},
            {"high_wall_low_object",
             {{"wall_hue", Comparator::GE, 0.5}, {"object_hue", Comparator::LE, 0.5}}},
            {"low_floor_blocks",
             {{"floor_hue", Comparator::LE, 0.5}, {"shape", Comparator::EQ, 0}}},
            {"high_wall_ellipsoids",
             {{"wall_hue", Comparator::GE, 0.5}, {"shape", Comparator::EQ, 1}}},
            {"low_object_big_scale",
             {{"object_hue", Comparator::LE, 0.5}, {"scale", Comparator::GE, 0.5}}},
            {"high_floor_big_az0",
             {{"floor_hue", Comparator::GE, 0.5},
              {"scale", Comparator::GE, 0.5},
              {"orientation", Comparator::EQ, 0}}},
            {"high_object_blocks_az0",
             {{"object_hue", Comparator::GE, 0.5},
              {"shape", Comparator::EQ, 0},
              {"orientation", Comparator::EQ, 0}}},
            {"high_floor_high_wall_high_object",
             {{"floor_hue", Comparator::GE, 0.5},
              {"wall_hue", Comparator::GE, thr("wall_hue", 3.0)},
              {"object_hue", Comparator::GE, 0.5}}},
            {"low_floor_low_wall_low_object",
             {{"floor_hue", Comparator::LE, 0.5},
              {"wall_hue", Comparator::LE, thr("wall_hue", 3.0)},
              {"object_hue", Comparator::LE, 0.5}}},
            {"low_floor_high_wall_low_object",
             {{"floor_hue", Comparator::LE, 0.5},
              {"wall_hue", Comparator::GE, thr("wall_hue", 3.0)},
              {"object_hue", Comparator::LE, 0.5}}},
            {"high_floor_big_ellipsoids",
             {{"floor_hue", Comparator::GE, 0.5},
              {"scale", Comparator::GE, 0.5},
              {"shape", Comparator::EQ, 1}}},
        };
    } else {
        throw config_error("unknown dataset_name: " + dataset_name);
    }
    for (const auto& t : tasks) t.validate(space);
    return tasks;
}

inline const TaskSpec& find_task(const std::vector<TaskSpec>& tasks, const std::string& name) {
    for (const auto& t : tasks)
        if (t.name == name) return t;
    throw config_error("unknown task name: " + name);
}

namespace io {

inline nlohmann::json task_to_json(const TaskSpec& t) {
    nlohmann::json jc = nlohmann::json::array();
    for (const auto& c : t.criteria) {
        const char* cmp = c.cmp == Comparator::EQ ? "eq" : (c.cmp == Comparator::LE ? "le" : "ge");
        jc.push_back({{"factor", c.factor}, {"cmp", cmp}, {"value", c.value}});
    }
    return nlohmann::json{{"name", t.name}, {"criteria", jc}};
}

inline TaskSpec task_from_json(const nlohmann::json& j) {
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    for (const auto& jc : j.at("criteria")) {
        TaskCriterion c;
        c.factor = jc.at("factor").get<std::string>();
        const auto cmp = jc.at("cmp").get<std::string>();
        c.cmp = cmp == "eq" ? Comparator::EQ : (cmp == "le" ? Comparator::LE : Comparator::GE);
        c.value = jc.at("value").get<double>();
        t.criteria.push_back(std::move(c));
    }
    return t;
}

}  // namespace io
}  // namespace ccd
