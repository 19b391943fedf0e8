#pragma once

#include "ccd/checkpoint.hpp"
#include "ccd/model_graph.hpp"
#include "ccd/tasks.hpp"

#include <filesystem>
#include <fstream>
#include <optional>

namespace ccd {

struct TrainConfig {
    std::string dataset = "dsprites_like";
    std::string task;  // catalog task name
    Variant variant = Variant::Ours;
    int epochs = 50;
    int freeze_epochs = 10;
    double lr = 1e-3;
    double warmup_frac = 0.05;   // linear warmup over this share of steps
    int alpha_ramp_epochs = 5;   // l_u weight ramp after the freeze window
    int batch_size = 128;
    LossWeights weights;
    NoiseConfig noise;
    ScmKind scm_kind = ScmKind::Tanh;
    UProduct u_product = UProduct::Elementwise;
    std::uint64_t seed = 0;
    int z_dim = 16;
    int n_concepts = 6;
    bool clip_enabled = true;
    bool ground_truth_A = false;
    int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
    double split_ratio = 0.7;
    int image_size = 64;
    std::size_t min_train_positives = 64;

    void validate() const {
        if (freeze_epochs < 0 || freeze_epochs > epochs)
            throw config_error("freeze_epochs must lie in [0, epochs]");
        if (batch_size < 1) throw config_error("batch_size must be positive");
        if (!(lr > 0.0)) throw config_error("lr must be positive");
    }
};

namespace io {

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return nlohmann::json{
        {"dataset", c.dataset},
        {"task", c.task},
        {"variant", variant_name(c.variant)},
        {"epochs", c.epochs},
        {"freeze_epochs", c.freeze_epochs},
        {"lr", c.lr},
        {"warmup_frac", c.warmup_frac},
        {"alpha_ramp_epochs", c.alpha_ramp_epochs},
        {"batch_size", c.batch_size},
        {"weights",
         {{"alpha", c.weights.alpha},
          {"beta1", c.weights.beta1},
          {"beta2", c.weights.beta2},
          {"delta", c.weights.delta},
          {"gamma", c.weights.gamma}}},
        {"noise",
         {{"zeta_std", c.noise.zeta_std},
          {"xi_std", c.noise.xi_std},
          {"eps_std", c.noise.eps_std}}},
        {"scm_kind", c.scm_kind == ScmKind::Tanh ? "tanh" : "linear"},
        {"u_product", c.u_product == UProduct::Elementwise ? "elementwise" : "inner"},
        {"seed", c.seed},
        {"z_dim", c.z_dim},
        {"n_concepts", c.n_concepts},
        {"clip_enabled", c.clip_enabled},
        {"ground_truth_A", c.ground_truth_A},
        {"checkpoint_every", c.checkpoint_every},
        {"split_ratio", c.split_ratio},
        {"image_size", c.image_size},
        {"min_train_positives", c.min_train_positives}};
}

}  // namespace io

/// Variant gating plus schedules, resolved for one epoch.
inline EffectiveWeights effective_weights(const TrainConfig& c, int epoch) {
    EffectiveWeights ew;
    ew.w = c.weights;
    switch (c.variant) {
        case Variant::BetaVae:
        case Variant::NoisyBetaVae:
            ew.w.alpha = ew.w.delta = ew.w.gamma = 0.0;
            break;
        case Variant::SupBetaVae:
        case Variant::SupNoisyBetaVae:
            ew.w.delta = ew.w.gamma = 0.0;
            ew.use_supervision = ew.w.alpha != 0.0;
            break;
        case Variant::Ours: {
            double ramp = 0.0;
            if (epoch >= c.freeze_epochs) {
                ramp = c.alpha_ramp_epochs <= 0
                           ? 1.0
                           : std::min(1.0, static_cast<double>(epoch - c.freeze_epochs + 1) /
                                               static_cast<double>(c.alpha_ramp_epochs));
            }
            ew.w.alpha *= ramp;
            ew.use_supervision = ew.w.alpha != 0.0;
            ew.use_classifier = ew.w.delta != 0.0;
            ew.use_diversity = ew.w.gamma != 0.0;
            break;
        }
    }
    return ew;
}

/// True while the causal layer and predictor must not move.
inline bool scm_frozen(const TrainConfig& c, int epoch) {
    if (!variant_trains_scm(c.variant)) return true;
    return epoch < c.freeze_epochs;
}

struct StepReport {
    LossBreakdown breakdown;
    bool applied = false;
    bool clip_applied = false;
    bool clip_skipped_zero = false;
    double lr = 0.0;
};

/// One gradient step. On a non-finite objective or gradient the model, the
/// optimizer, and the rng stream are left exactly as they were.
inline StepReport train_step(RunState& rs, const Batch& batch, const TrainConfig& cfg,
                             double lr_now) {
    const std::string rng_snapshot = rs.rng.serialize();
    StepReport rep;
    rep.lr = lr_now;

    ad::Tape tape;
    GraphParams gp = GraphParams::leaves(tape, rs.model.params);
    const EffectiveWeights ew = effective_weights(cfg, rs.epoch);
    ForwardGraph fg = build_training_graph(tape, rs.model, gp, batch, ew, rs.rng);
    rep.breakdown = fg.breakdown;

    if (!std::isfinite(fg.breakdown.total)) {
        rs.rng.deserialize(rng_snapshot);
        return rep;
    }
    tape.backward(fg.total.id());

    const bool freeze = scm_frozen(cfg, rs.epoch);
    const auto& names = rs.model.params.names();
    std::vector<Mat> grads(names.size());
    std::vector<bool> mask(names.size(), true);
    const auto& scm_names = ModelState::scm_param_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        grads[i] = gp.grad_of(names[i]);
        if (!grads[i].allFinite()) {
            rs.rng.deserialize(rng_snapshot);
            return rep;
        }
        const bool is_scm = std::find(scm_names.begin(), scm_names.end(), names[i]) !=
                            scm_names.end();
        if (is_scm && freeze) mask[i] = false;
        if (cfg.ground_truth_A && names[i] == "scm.A") mask[i] = false;
    }

    rs.opt.step(rs.model.params, grads, mask, lr_now);
    rep.applied = true;

    const bool a_updated = mask[rs.model.params.index_of("scm.A")];
    if (a_updated && cfg.clip_enabled) {
        rep.clip_applied = clip_A(rs.model.A());
        rep.clip_skipped_zero = !rep.clip_applied;
    }
    ++rs.step;
    return rep;
}

/// Converts corpus samples to a channel-major training batch.
inline Batch make_batch(const Corpus& corpus, const TaskDataset& ds,
                        const std::vector<std::size_t>& rows) {
    const auto& space = corpus.space();
    const int h = space.image_h, w = space.image_w, c = space.image_c;
    const Eigen::Index pixels = static_cast<Eigen::Index>(h) * w * c;
    Batch b;
    b.x.resize(static_cast<Eigen::Index>(rows.size()), pixels);
    b.u.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(space.m()));
    b.y.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t ord = ds.indices[rows[r]];
        const Sample& s = corpus.sample(ord);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    b.x(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(ch) * h * w + y * w + x) =
                        s.image[(static_cast<std::size_t>(y) * w + x) * c + ch];
        b.u.row(static_cast<Eigen::Index>(r)) = s.u.transpose();
        b.y.push_back(ds.labels[rows[r]]);
    }
    return b;
}

struct FitResult {
    RunState state;
    std::vector<LossBreakdown> history;  // one entry per applied step
    int aborted_steps = 0;
};

/// Full training loop: seeded init (or resume), per-epoch shuffling, linear
/// warmup, freeze window, post-step clipping, JSONL step log, checkpoint
/// cadence. Three consecutive aborted steps end the run with an error.
inline FitResult fit(const TrainConfig& cfg, const Corpus& corpus, const TaskSpec& task,
                     const DatasetSplit& split,
                     const std::filesystem::path& run_dir = {},
                     std::optional<std::filesystem::path> resume_from = {}) {
    cfg.validate();
    auto pair = build_task_dataset(task, corpus, split, cfg.seed, cfg.min_train_positives);

    FitResult out;
    if (resume_from) {
        out.state = io::load_checkpoint(*resume_from);
    } else {
        Rng init_rng(cfg.seed);
        const ArchSpec arch = cfg.dataset == "shapes3d_like"
                                  ? ArchSpec::shapes3d_conv(cfg.image_size, cfg.image_size)
                                  : ArchSpec::dsprites_fc(cfg.image_size, cfg.image_size);
        LatentLayout layout{cfg.z_dim, static_cast<int>(corpus.space().m()), cfg.n_concepts};
        NoiseConfig noise = cfg.noise;
        noise.variant = cfg.variant;
        out.state.model = init_model(cfg.dataset, cfg.variant, arch, layout, noise,
                                     cfg.scm_kind, init_rng);
        if (cfg.ground_truth_A) {
            std::vector<int> rows;
            for (const auto& f : task.relevant_factors())
                rows.push_back(corpus.space().factor_index_of(f));
            set_ground_truth_A(out.state.model, rows);
        }
        out.state.opt.init(out.state.model.params);
        out.state.rng = init_rng;  // continue the same stream into training
    }
    RunState& rs = out.state;

    std::ofstream log;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir / "checkpoints");
        std::ofstream(run_dir / "config.json") << io::train_config_to_json(cfg).dump(2) << "\n";
        log.open(run_dir / "train_log.jsonl", resume_from ? std::ios::app : std::ios::out);
    }

    const std::size_t n_train = pair.train.indices.size();
    const auto steps_per_epoch = static_cast<std::int64_t>(
        (n_train + static_cast<std::size_t>(cfg.batch_size) - 1) /
        static_cast<std::size_t>(cfg.batch_size));
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const auto warmup_steps =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(cfg.warmup_frac *
                                                            static_cast<double>(total_steps)));

    int consecutive_aborts = 0;
    for (; rs.epoch < cfg.epochs; ++rs.epoch) {
        std::vector<std::size_t> order(n_train);
        std::iota(order.begin(), order.end(), 0);
        rs.rng.shuffle(order);
        for (std::size_t at = 0; at < n_train; at += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t take =
                std::min(static_cast<std::size_t>(cfg.batch_size), n_train - at);
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(at),
                                          order.begin() + static_cast<std::ptrdiff_t>(at + take));
            Batch batch = make_batch(corpus, pair.train, rows);
            const double lr_now =
                cfg.lr * std::min(1.0, static_cast<double>(rs.step + 1) /
                                           static_cast<double>(warmup_steps));
            StepReport rep = train_step(rs, batch, cfg, lr_now);
            if (!rep.applied) {
                ++consecutive_aborts;
                if (log.is_open())
                    log << nlohmann::json{{"event", "aborted_step"},
                                          {"epoch", rs.epoch},
                                          {"step", rs.step}}
                               .dump()
                        << "\n";
                if (consecutive_aborts >= 3)
                    throw numeric_error("training failed: three consecutive aborted steps");
                continue;
            }
            consecutive_aborts = 0;
            out.history.push_back(rep.breakdown);
            if (log.is_open()) {
                const EffectiveWeights ew = effective_weights(cfg, rs.epoch);
                log << nlohmann::json{{"step", rs.step},
                                      {"epoch", rs.epoch},
                                      {"lr", rep.lr},
                                      {"recon", rep.breakdown.recon},
                                      {"kl_eps", rep.breakdown.kl_eps},
                                      {"kl_zc", rep.breakdown.kl_zc},
                                      {"l_u", rep.breakdown.l_u},
                                      {"l_clf", rep.breakdown.l_clf},
                                      {"l_diversity", rep.breakdown.l_diversity},
                                      {"total", rep.breakdown.total},
                                      {"weights",
                                       {{"alpha", ew.w.alpha},
                                        {"beta1", ew.w.beta1},
                                        {"beta2", ew.w.beta2},
                                        {"delta", ew.w.delta},
                                        {"gamma", ew.w.gamma}}}}
                           .dump()
                    << "\n";
            }
        }
        if (!run_dir.empty() && cfg.checkpoint_every > 0 &&
            (rs.epoch + 1) % cfg.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", rs.epoch + 1);
            io::save_checkpoint(rs, run_dir / "checkpoints" / name);
        }
    }
    if (!run_dir.empty()) io::save_checkpoint(rs, run_dir / "checkpoints" / "final.ckpt");
    return out;
}

}  // namespace ccd
