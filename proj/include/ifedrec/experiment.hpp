#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ifedrec/common.hpp"
#include "ifedrec/data.hpp"
#include "ifedrec/federation.hpp"

namespace ifedrec {

// Experiment configuration: a sectioned key-value text file. The dataset
// section names either files or a synthetic generator, the train section maps
// onto TrainConfig, the sweep section holds value lists, and output names the
// result directory. Command-line flags override file values.
struct DatasetConfig {
    bool synthetic = false;
    std::string interactions_path;
    std::string attributes_path;
    std::string split_file;
    bool has_ratio_split = false;
    double warm_ratio = 0.8, val_ratio = 0.06, test_ratio = 0.14;
    std::uint64_t split_seed = 0;
    SyntheticConfig syn;
    std::uint64_t syn_seed = 0;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    TrainConfig train;
    bool lambda_given = false;  // when absent, the variant picks its tuned value
    std::vector<std::pair<std::string, std::vector<std::string>>> sweep;
    std::string output_dir = "out";

    void validate() const {
        if (dataset.synthetic) {
            if (!dataset.interactions_path.empty() || !dataset.attributes_path.empty())
                throw ConfigError("config: choose either synthetic data or file paths, not both");
        } else {
            if (dataset.interactions_path.empty() || dataset.attributes_path.empty())
                throw ConfigError("config: dataset needs interactions and attributes paths "
                                  "or synthetic = true");
            if (dataset.split_file.empty() && !dataset.has_ratio_split)
                throw ConfigError("config: dataset needs split_file or split_ratio");
        }
        train.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string token;
    while (ss >> token) out.push_back(token);
    return out;
}

inline double to_double(const std::string& v, const std::string& key) {
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value '" + v + "' for " + key);
    }
}

inline int to_int(const std::string& v, const std::string& key) {
    try {
        return std::stoi(v);
    } catch (const std::exception&) {
        throw ConfigError("bad integer value '" + v + "' for " + key);
    }
}

inline std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

}  // namespace detail

inline void set_dataset_field(DatasetConfig& ds, const std::string& key,
                              const std::string& value) {
    if (key == "interactions") ds.interactions_path = value;
    else if (key == "attributes") ds.attributes_path = value;
    else if (key == "split_file") ds.split_file = value;
    else if (key == "split_ratio") {
        auto parts = detail::split_ws(value);
        if (parts.size() != 3) throw ConfigError("split_ratio needs three values");
        ds.warm_ratio = detail::to_double(parts[0], key);
        ds.val_ratio = detail::to_double(parts[1], key);
        ds.test_ratio = detail::to_double(parts[2], key);
        ds.has_ratio_split = true;
    } else if (key == "split_seed") ds.split_seed = std::stoull(value);
    else if (key == "synthetic") ds.synthetic = (value == "true" || value == "1");
    else if (key == "users") ds.syn.num_users = detail::to_int(value, key);
    else if (key == "items") ds.syn.num_items = detail::to_int(value, key);
    else if (key == "latent_dim") ds.syn.latent_dim = detail::to_int(value, key);
    else if (key == "attr_dim") ds.syn.attr_dim = detail::to_int(value, key);
    else if (key == "attr_noise") ds.syn.attr_noise = detail::to_double(value, key);
    else if (key == "interactions_per_user")
        ds.syn.interactions_per_user = detail::to_int(value, key);
    else if (key == "cold_positives_per_user")
        ds.syn.cold_positives_per_user = detail::to_int(value, key);
    else if (key == "gen_seed") ds.syn_seed = std::stoull(value);
    else throw ConfigError("unknown dataset key '" + key + "'");
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig config;
    std::string section;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            if (section != "dataset" && section != "train" && section != "sweep" &&
                section != "output")
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section == "dataset") {
            set_dataset_field(config.dataset, key, value);
        } else if (section == "train") {
            if (key == "ks") {
                config.train.eval_ks.clear();
                for (const std::string& k : detail::split_ws(value))
                    config.train.eval_ks.push_back(detail::to_int(k, key));
            } else {
                set_config_field(config.train, key, value);
                if (key == "lambda" || key == "alignment_coeff") config.lambda_given = true;
            }
        } else if (section == "sweep") {
            config.sweep.emplace_back(key, detail::split_ws(value));
        } else if (section == "output") {
            if (key == "dir") config.output_dir = value;
            else throw ConfigError("unknown output key '" + key + "'");
        } else {
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        }
    }
    // The tuned alignment coefficient differs per variant; fill it in when
    // the config did not pin one.
    if (!config.lambda_given && config.train.variant == Variant::PFedRec)
        config.train.alignment_coeff = 10.0;
    return config;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str());
}

// Canonical serialization: fixed key order, full double precision. Feeding
// the output back through the parser reproduces the config, and its hash
// identifies a run.
inline std::string serialize_experiment_config(const ExperimentConfig& config) {
    std::ostringstream out;
    const DatasetConfig& ds = config.dataset;
    out << "[dataset]\n";
    if (ds.synthetic) {
        out << "synthetic = true\n";
        out << "users = " << ds.syn.num_users << "\n";
        out << "items = " << ds.syn.num_items << "\n";
        out << "latent_dim = " << ds.syn.latent_dim << "\n";
        out << "attr_dim = " << ds.syn.attr_dim << "\n";
        out << "attr_noise = " << detail::format_double(ds.syn.attr_noise) << "\n";
        out << "interactions_per_user = " << ds.syn.interactions_per_user << "\n";
        out << "cold_positives_per_user = " << ds.syn.cold_positives_per_user << "\n";
        out << "gen_seed = " << ds.syn_seed << "\n";
        out << "split_ratio = " << detail::format_double(ds.syn.warm_ratio) << " "
            << detail::format_double(ds.syn.val_ratio) << " "
            << detail::format_double(ds.syn.test_ratio) << "\n";
    } else {
        out << "interactions = " << ds.interactions_path << "\n";
        out << "attributes = " << ds.attributes_path << "\n";
        if (!ds.split_file.empty()) out << "split_file = " << ds.split_file << "\n";
        if (ds.has_ratio_split)
            out << "split_ratio = " << detail::format_double(ds.warm_ratio) << " "
                << detail::format_double(ds.val_ratio) << " "
                << detail::format_double(ds.test_ratio) << "\n";
        out << "split_seed = " << ds.split_seed << "\n";
    }
    const TrainConfig& t = config.train;
    out << "[train]\n";
    out << "variant = " << variant_name(t.variant) << "\n";
    out << "d = " << t.embedding_dim << "\n";
    out << "rounds = " << t.rounds << "\n";
    out << "alpha = " << detail::format_double(t.client_fraction) << "\n";
    out << "e1 = " << t.meta_epochs << "\n";
    out << "meta_batch = " << t.meta_batch << "\n";
    out << "e2 = " << t.local_epochs << "\n";
    out << "batch = " << t.batch_size << "\n";
    out << "gamma = " << detail::format_double(t.meta_lr) << "\n";
    out << "eta1 = " << detail::format_double(t.lr_personal) << "\n";
    out << "eta2 = " << detail::format_double(t.lr_item) << "\n";
    out << "lambda = " << detail::format_double(t.alignment_coeff) << "\n";
    out << "delta = " << detail::format_double(t.ldp_scale) << "\n";
    out << "neg_ratio = " << t.negative_ratio << "\n";
    out << "eval_every = " << t.eval_every << "\n";
    out << "seed = " << t.seed << "\n";
    out << "no_iram = " << (t.no_iram ? "true" : "false") << "\n";
    out << "ks =";
    for (int k : t.eval_ks) out << " " << k;
    out << "\n";
    out << "idcg_truncate_at_k = " << (t.idcg_truncate_at_k ? "true" : "false") << "\n";
    if (!config.sweep.empty()) {
        out << "[sweep]\n";
        for (const auto& [key, values] : config.sweep) {
            out << key << " =";
            for (const std::string& v : values) out << " " << v;
            out << "\n";
        }
    }
    out << "[output]\n";
    out << "dir = " << config.output_dir << "\n";
    return out.str();
}

inline std::string config_hash(const ExperimentConfig& config) {
    return hex64(fnv1a64(serialize_experiment_config(config)));
}

// Materializes the dataset named by the config, generating synthetic data or
// loading the files.
inline Dataset realize_dataset(const ExperimentConfig& config) {
    const DatasetConfig& ds = config.dataset;
    if (ds.synthetic) return generate_synthetic(ds.syn, ds.syn_seed).first;
    SplitSpec split = ds.split_file.empty()
                          ? SplitSpec(RatioSplit{ds.split_seed, ds.warm_ratio, ds.val_ratio,
                                                 ds.test_ratio})
                          : load_split_file(ds.split_file);
    return load_dataset(ds.interactions_path, ds.attributes_path, split);
}

}  // namespace ifedrec
