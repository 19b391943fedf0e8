#include "ccd/corpus.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>

using namespace ccd;

TEST_CASE("factor spaces have the published six factors", "[datasets]") {
    auto ds = build_factor_space("dsprites_like", Resolution::Mini);
    REQUIRE(ds.m() == 6);
    CHECK(ds.factors[0].name == "color");
    CHECK(ds.factors[1].name == "shape");
    CHECK(ds.factors[2].name == "scale");
    CHECK(ds.factors[3].name == "orientation");
    CHECK(ds.factors[4].name == "posX");
    CHECK(ds.factors[5].name == "posY");
    CHECK(ds.factors[1].category_labels ==
          std::vector<std::string>{"square", "ellipse", "heart"});
    CHECK(ds.size() <= 20000);

    auto s3 = build_factor_space("shapes3d_like", Resolution::Mini);
    REQUIRE(s3.m() == 6);
    CHECK(s3.factors[0].name == "floor_hue");
    CHECK(s3.factors[1].name == "wall_hue");
    CHECK(s3.factors[2].name == "object_hue");
    CHECK(s3.factors[3].name == "scale");
    CHECK(s3.factors[4].name == "shape");
    CHECK(s3.factors[5].name == "orientation");
    CHECK(s3.size() <= 20000);

    CHECK_THROWS_AS(build_factor_space("mnist", Resolution::Mini), config_error);
}

TEST_CASE("full-grid resolution stays desk renderable", "[datasets]") {
    CHECK(build_factor_space("dsprites_like", Resolution::FullGrid).size() <= 20000);
    CHECK(build_factor_space("shapes3d_like", Resolution::FullGrid).size() <= 20000);
}

TEST_CASE("ordinal enumeration round-trips and covers the product", "[datasets]") {
    auto space = build_factor_space("dsprites_like", Resolution::Mini);
    std::size_t expect = 1;
    for (const auto& f : space.factors) expect *= f.cardinality();
    REQUIRE(space.size() == expect);
    for (std::size_t ord : {std::size_t(0), std::size_t(1), space.size() - 1,
                            space.size() / 2}) {
        CHECK(space.index_to_ordinal(space.ordinal_to_index(ord)) == ord);
    }
}

TEST_CASE("normalized labels hit 0 and 1 at the grid extremes", "[datasets]") {
    for (const char* name : {"dsprites_like", "shapes3d_like"}) {
        auto space = build_factor_space(name, Resolution::Mini);
        std::vector<std::size_t> zeros(space.m(), 0), maxs(space.m());
        for (std::size_t f = 0; f < space.m(); ++f)
            maxs[f] = space.factors[f].cardinality() - 1;
        Sample lo = render(space, zeros);
        Sample hi = render(space, maxs);
        CHECK(lo.u.minCoeff() == 0.0);
        CHECK(lo.u.maxCoeff() == 0.0);
        for (Eigen::Index f = 0; f < hi.u.size(); ++f) {
            // single-valued factors normalize to 0 by convention
            const bool single = space.factors[static_cast<std::size_t>(f)].cardinality() == 1;
            CHECK(hi.u(f) == (single ? 0.0 : 1.0));
        }
    }
}

TEST_CASE("labels are monotone in grid index", "[datasets]") {
    auto space = build_factor_space("dsprites_like", Resolution::Mini);
    for (const auto& f : space.factors) {
        for (std::size_t i = 0; i + 1 < f.cardinality(); ++i)
            CHECK(f.normalized(i) < f.normalized(i + 1));
    }
}

TEST_CASE("render is deterministic and in range", "[datasets]") {
    for (const char* name : {"dsprites_like", "shapes3d_like"}) {
        auto space = build_factor_space(name, Resolution::Mini);
        auto idx = space.ordinal_to_index(space.size() / 3);
        Sample a = render(space, idx);
        Sample b = render(space, idx);
        REQUIRE(a.image.size() == b.image.size());
        CHECK(a.image == b.image);
        for (float v : a.image) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("render rejects out-of-range indices", "[datasets]") {
    auto space = build_factor_space("dsprites_like", Resolution::Mini);
    std::vector<std::size_t> idx(space.m(), 0);
    idx[2] = space.factors[2].cardinality();
    CHECK_THROWS_AS(render(space, idx), contract_error);
}

TEST_CASE("single-factor bumps always change at least one pixel", "[datasets][slow]") {
    // exhaustive distinctness audit over the mini grids
    for (const char* name : {"dsprites_like", "shapes3d_like"}) {
        auto space = build_factor_space(name, Resolution::Mini);
        Corpus corpus(build_factor_space(name, Resolution::Mini));
        std::size_t checked = 0;
        for (std::size_t ord = 0; ord < corpus.size(); ++ord) {
            auto idx = space.ordinal_to_index(ord);
            for (std::size_t f = 0; f < space.m(); ++f) {
                if (idx[f] + 1 >= space.factors[f].cardinality()) continue;
                auto bumped = idx;
                ++bumped[f];
                const auto& a = corpus.sample(ord).image;
                const auto& b = corpus.sample(space.index_to_ordinal(bumped)).image;
                if (a == b) {
                    INFO("identical images for " << name << " factor "
                                                 << space.factors[f].name << " at ordinal "
                                                 << ord);
                    REQUIRE(a != b);
                }
                ++checked;
            }
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("stratified split respects per-value shares", "[datasets]") {
    auto space = build_factor_space("dsprites_like", Resolution::Mini);
    auto strat = io::default_stratify("dsprites_like");
    auto split = stratified_split(space, strat, 0.7, 1234);

    const std::size_t n = space.size();
    REQUIRE(split.train_indices.size() + split.test_indices.size() == n);

    // disjointness
    std::vector<char> seen(n, 0);
    for (auto i : split.train_indices) seen[i] += 1;
    for (auto i : split.test_indices) seen[i] += 1;
    for (char c : seen) REQUIRE(c == 1);

    // per-factor-value train share within +-2 points of the ratio
    for (const auto& fname : strat) {
        const auto f = static_cast<std::size_t>(space.factor_index_of(fname));
        std::map<std::size_t, std::pair<std::size_t, std::size_t>> counts;  // value -> train,total
        for (std::size_t ord = 0; ord < n; ++ord)
            counts[space.ordinal_to_index(ord)[f]].second++;
        for (auto ord : split.train_indices) counts[space.ordinal_to_index(ord)[f]].first++;
        for (const auto& [value, ct] : counts) {
            const double share = static_cast<double>(ct.first) / static_cast<double>(ct.second);
            INFO(fname << "=" << value << " share=" << share);
            CHECK(std::abs(share - 0.7) <= 0.02);
        }
    }
}

TEST_CASE("split is deterministic per seed", "[datasets]") {
    auto space = build_factor_space("shapes3d_like", Resolution::Mini);
    auto strat = io::default_stratify("shapes3d_like");
    auto a = stratified_split(space, strat, 0.7, 99);
    auto b = stratified_split(space, strat, 0.7, 99);
    auto c = stratified_split(space, strat, 0.7, 100);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.train_indices != c.train_indices);

    // shapes3d per-value shares under a fractional per-cell quota
    const std::size_t n = space.size();
    for (const auto& fname : strat) {
        const auto f = static_cast<std::size_t>(space.factor_index_of(fname));
        std::map<std::size_t, std::pair<std::size_t, std::size_t>> counts;
        for (std::size_t ord = 0; ord < n; ++ord)
            counts[space.ordinal_to_index(ord)[f]].second++;
        for (auto ord : a.train_indices) counts[space.ordinal_to_index(ord)[f]].first++;
        for (const auto& [value, ct] : counts)
            CHECK(std::abs(static_cast<double>(ct.first) / ct.second - 0.7) <= 0.02);
    }
}

TEST_CASE("half split on a two-value factor is exactly even", "[datasets]") {
    auto space = build_factor_space("dsprites_like", Resolution::Mini);
    auto split = stratified_split(space, {"shape"}, 0.5, 7);
    std::map<std::size_t, std::size_t> train_by_shape, total_by_shape;
    for (std::size_t ord = 0; ord < space.size(); ++ord)
        total_by_shape[space.ordinal_to_index(ord)[1]]++;
    for (auto ord : split.train_indices) train_by_shape[space.ordinal_to_index(ord)[1]]++;
    for (const auto& [v, total] : total_by_shape)
        CHECK(train_by_shape[v] * 2 == total);
}

TEST_CASE("unknown stratify factor is a configuration error", "[datasets]") {
    auto space = build_factor_space("dsprites_like", Resolution::Mini);
    CHECK_THROWS_AS(stratified_split(space, {"hue"}, 0.7, 1), config_error);
    CHECK_THROWS_AS(stratified_split(space, {"shape"}, 1.5, 1), config_error);
}

TEST_CASE("corpus round-trips through the disk format", "[datasets]") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "ccd_corpus_test";
    fs::remove_all(dir);

    FactorSpace space = build_factor_space("dsprites_like", Resolution::Mini);
    // shrink grids so the test corpus stays tiny
    space.factors[3].values = {0.0, 0.9};
    space.factors[4].values = {0.0, 0.5, 1.0};
    space.factors[5].values = {0.0, 0.5, 1.0};
    space.factors[2].values = {0.5, 1.0};
    Corpus corpus(space);
    io::save_corpus(corpus, dir);
    Corpus loaded = io::load_corpus(dir);

    REQUIRE(loaded.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); i += 7) {
        CHECK(loaded.sample(i).image == corpus.sample(i).image);
        CHECK(loaded.sample(i).u == corpus.sample(i).u);
    }
    auto split = stratified_split(space, {"shape"}, 0.7, 5);
    io::save_split(split, dir / "split.json");
    auto split2 = io::load_split(dir / "split.json");
    CHECK(split.train_indices == split2.train_indices);
    CHECK(split.test_indices == split2.test_indices);
    fs::remove_all(dir);
}
