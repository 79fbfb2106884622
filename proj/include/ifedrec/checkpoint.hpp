#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ifedrec/common.hpp"
#include "ifedrec/federation.hpp"
#include "ifedrec/matrix.hpp"
#include "ifedrec/model.hpp"
#include "ifedrec/nn.hpp"

namespace ifedrec {

// Flat binary checkpoint: a magic tag, then every tensor as a shape header
// followed by raw little-endian doubles. Bit-exact on round-trip.
namespace ckpt {

constexpr char kMagic[8] = {'I', 'F', 'E', 'D', 'R', 'E', 'C', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw IoError("checkpoint: truncated file");
    return v;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(std::istream& in) {
    std::vector<double> v(read_u64(in));
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double))))
        throw IoError("checkpoint: truncated tensor");
    return v;
}

inline void write_matrix(std::ostream& out, const DenseMatrix& m) {
    write_u64(out, m.rows);
    write_u64(out, m.cols);
    write_doubles(out, m.values);
}

inline DenseMatrix read_matrix(std::istream& in) {
    DenseMatrix m;
    m.rows = read_u64(in);
    m.cols = read_u64(in);
    m.values = read_doubles(in);
    if (m.values.size() != m.rows * m.cols) throw IoError("checkpoint: tensor size mismatch");
    return m;
}

inline void write_mlp(std::ostream& out, const MlpParams& params) {
    write_u64(out, params.layers.size());
    for (const MlpLayer& layer : params.layers) {
        write_u64(out, static_cast<std::uint64_t>(layer.activation));
        write_matrix(out, layer.weight);
        write_doubles(out, layer.bias);
    }
}

inline MlpParams read_mlp(std::istream& in) {
    MlpParams params;
    params.layers.resize(read_u64(in));
    for (MlpLayer& layer : params.layers) {
        layer.activation = static_cast<Activation>(read_u64(in));
        layer.weight = read_matrix(in);
        layer.bias = read_doubles(in);
    }
    params.validate();
    return params;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    std::string s(read_u64(in), '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(s.size())))
        throw IoError("checkpoint: truncated string");
    return s;
}

}  // namespace ckpt

inline void save_client_model(std::ostream& out, const ClientModel& model) {
    ckpt::write_u64(out, model.variant == Variant::NCF ? 0 : 1);
    ckpt::write_matrix(out, model.item_embedding);
    ckpt::write_doubles(out, model.user_embedding);
    ckpt::write_mlp(out, model.predictor);
}

inline ClientModel load_client_model(std::istream& in) {
    ClientModel model;
    model.variant = ckpt::read_u64(in) == 0 ? Variant::NCF : Variant::PFedRec;
    model.item_embedding = ckpt::read_matrix(in);
    model.user_embedding = ckpt::read_doubles(in);
    model.predictor = ckpt::read_mlp(in);
    return model;
}

// Persists the trained system: server embedding and attribute network, every
// client's private modules, the serialized config, and the best round. RNG
// state is not persisted; a restored system is for inference and evaluation.
inline void save_system(const TrainedSystem& system, const std::string& path,
                        const std::string& config_text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(ckpt::kMagic, sizeof(ckpt::kMagic));
    ckpt::write_string(out, config_text);
    ckpt::write_u64(out, static_cast<std::uint64_t>(system.best_round));
    ckpt::write_matrix(out, system.server.global_item_embedding);
    ckpt::write_mlp(out, system.server.meta.net);
    ckpt::write_u64(out, system.clients.size());
    for (const ClientState& client : system.clients) save_client_model(out, client.model);
    if (!out) throw IoError("checkpoint write failed: " + path);
}

inline TrainedSystem load_system(const std::string& path, std::string* config_text = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[sizeof(ckpt::kMagic)];
    if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), ckpt::kMagic))
        throw IoError("not a checkpoint file: " + path);
    TrainedSystem system;
    std::string text = ckpt::read_string(in);
    if (config_text) *config_text = text;
    system.best_round = static_cast<int>(ckpt::read_u64(in));
    system.server.global_item_embedding = ckpt::read_matrix(in);
    system.server.meta.net = ckpt::read_mlp(in);
    system.clients.resize(ckpt::read_u64(in));
    for (std::size_t u = 0; u < system.clients.size(); ++u) {
        system.clients[u].user = static_cast<int>(u);
        system.clients[u].model = load_client_model(in);
    }
    return system;
}

}  // namespace ifedrec
