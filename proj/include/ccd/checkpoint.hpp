#pragma once

#include "ccd/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace ccd {

/// Everything needed to continue a run exactly: model, optimizer moments,
/// rng stream, and loop counters.
struct RunState {
    ModelState model;
    Adam opt;
    Rng rng;
    int epoch = 0;
    std::int64_t step = 0;
};

namespace io {

using nlohmann::json;

inline json arch_to_json(const ArchSpec& a) {
    return json{{"kind", a.kind == ArchKind::FullyConnected ? "fc" : "conv"},
                {"image_h", a.image_h},
                {"image_w", a.image_w},
                {"image_c", a.image_c},
                {"enc_widths", a.enc_widths},
                {"dec_widths", a.dec_widths},
                {"enc_channels", a.enc_channels},
                {"dec_channels", a.dec_channels},
                {"conv_kernel", a.conv_kernel},
                {"conv_stride", a.conv_stride},
                {"conv_pad", a.conv_pad},
                {"dec_base_h", a.dec_base_h},
                {"dec_base_w", a.dec_base_w}};
}

inline ArchSpec arch_from_json(const json& j) {
    ArchSpec a;
    a.kind = j.at("kind").get<std::string>() == "fc" ? ArchKind::FullyConnected
                                                     : ArchKind::Conv;
    a.image_h = j.at("image_h").get<int>();
    a.image_w = j.at("image_w").get<int>();
    a.image_c = j.at("image_c").get<int>();
    a.enc_widths = j.at("enc_widths").get<std::vector<int>>();
    a.dec_widths = j.at("dec_widths").get<std::vector<int>>();
    a.enc_channels = j.at("enc_channels").get<std::vector<int>>();
    a.dec_channels = j.at("dec_channels").get<std::vector<int>>();
    a.conv_kernel = j.at("conv_kernel").get<int>();
    a.conv_stride = j.at("conv_stride").get<int>();
    a.conv_pad = j.at("conv_pad").get<int>();
    a.dec_base_h = j.at("dec_base_h").get<int>();
    a.dec_base_w = j.at("dec_base_w").get<int>();
    return a;
}

constexpr char kCheckpointMagic[9] = "CCDCKPT1";

/// Single-file checkpoint: magic, little-endian u64 header length, JSON
/// header, then the raw double blob (parameters, then Adam moments).
/// save -> load -> save is byte-identical.
inline void save_checkpoint(const RunState& rs, const std::filesystem::path& file) {
    const ModelState& s = rs.model;
    json tensors = json::array();
    for (std::size_t i = 0; i < s.params.size(); ++i)
        tensors.push_back(json{{"name", s.params.names()[i]},
                               {"rows", s.params.value(i).rows()},
                               {"cols", s.params.value(i).cols()}});
    json header{
        {"version", 1},
        {"dataset_name", s.dataset_name},
        {"variant", variant_name(s.variant)},
        {"arch", arch_to_json(s.arch)},
        {"layout", {{"z_dim", s.layout.z_dim}, {"m", s.layout.m}, {"n", s.layout.n}}},
        {"noise",
         {{"zeta_std", s.noise.zeta_std},
          {"xi_std", s.noise.xi_std},
          {"eps_std", s.noise.eps_std}}},
        {"scm_kind", s.scm_kind == ScmKind::Tanh ? "tanh" : "linear"},
        {"u_product", s.u_product == UProduct::Elementwise ? "elementwise" : "inner"},
        {"epoch", rs.epoch},
        {"step", rs.step},
        {"adam_steps", rs.opt.steps_taken()},
        {"rng", rs.rng.serialize()},
        {"tensors", tensors}};
    const std::string htext = header.dump();

    std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw config_error("cannot write checkpoint: " + file.string());
    out.write(kCheckpointMagic, 8);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    auto write_mat = [&out](const Mat& m) {
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(sizeof(double) * m.size()));
    };
    for (std::size_t i = 0; i < s.params.size(); ++i) write_mat(s.params.value(i));
    for (std::size_t i = 0; i < rs.opt.slots(); ++i) write_mat(rs.opt.moment1(i));
    for (std::size_t i = 0; i < rs.opt.slots(); ++i) write_mat(rs.opt.moment2(i));
}

inline RunState load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw config_error("checkpoint not found: " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 8) != std::string(kCheckpointMagic, 8))
        throw config_error("bad checkpoint magic in " + file.string());
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    json header = json::parse(htext);
    if (header.at("version").get<int>() != 1)
        throw config_error("unsupported checkpoint version");

    RunState rs;
    ModelState& s = rs.model;
    s.dataset_name = header.at("dataset_name").get<std::string>();
    s.variant = variant_from_name(header.at("variant").get<std::string>());
    s.arch = arch_from_json(header.at("arch"));
    s.layout.z_dim = header.at("layout").at("z_dim").get<int>();
    s.layout.m = header.at("layout").at("m").get<int>();
    s.layout.n = header.at("layout").at("n").get<int>();
    s.noise.zeta_std = header.at("noise").at("zeta_std").get<double>();
    s.noise.xi_std = header.at("noise").at("xi_std").get<double>();
    s.noise.eps_std = header.at("noise").at("eps_std").get<double>();
    s.noise.variant = s.variant;
    s.scm_kind =
        header.at("scm_kind").get<std::string>() == "tanh" ? ScmKind::Tanh : ScmKind::Linear;
    s.u_product = header.at("u_product").get<std::string>() == "elementwise"
                      ? UProduct::Elementwise
                      : UProduct::Inner;
    rs.epoch = header.at("epoch").get<int>();
    rs.step = header.at("step").get<std::int64_t>();
    rs.rng.deserialize(header.at("rng").get<std::string>());

    auto read_mat = [&in, &file](Mat& m) {
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!in) throw config_error("checkpoint truncated: " + file.string());
    };
    for (const auto& jt : header.at("tensors")) {
        Mat m(jt.at("rows").get<Eigen::Index>(), jt.at("cols").get<Eigen::Index>());
        read_mat(m);
        s.params.add(jt.at("name").get<std::string>(), std::move(m));
    }
    rs.opt.init(s.params);
    rs.opt.set_steps_taken(header.at("adam_steps").get<std::int64_t>());
    for (std::size_t i = 0; i < rs.opt.slots(); ++i) read_mat(rs.opt.moment1(i));
    for (std::size_t i = 0; i < rs.opt.slots(); ++i) read_mat(rs.opt.moment2(i));
    return rs;
}

}  // namespace io
}  // namespace ccd
