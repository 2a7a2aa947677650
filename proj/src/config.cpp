#include "inrpatch/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace inrpatch {

using nlohmann::json;

RunMode run_mode_from_string(const std::string& s) {
    if (s == "multistage") return RunMode::Multistage;
    if (s == "image_based") return RunMode::ImageBased;
    if (s == "patch_based") return RunMode::PatchBased;
    throw std::invalid_argument("config: unknown mode '" + s + "'");
}

std::string to_string(RunMode m) {
    switch (m) {
        case RunMode::Multistage: return "multistage";
        case RunMode::ImageBased: return "image_based";
        case RunMode::PatchBased: return "patch_based";
    }
    return "?";
}

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + (where.empty() ? it.key() : where + "." + it.key()) + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

} // namespace

void RunConfig::validate() const {
    if (image_size < 8 || image_size % 4 != 0)
        throw std::invalid_argument("config: image_size must be >= 8 and divisible by 4");
    if (dataset_source != "procedural" && dataset_source != "folder")
        throw std::invalid_argument("config: dataset.source must be 'procedural' or 'folder'");
    if (dataset_source == "folder" && dataset_path.empty())
        throw std::invalid_argument("config: dataset.path required for folder source");
    if (dataset_source == "procedural" && dataset_count < 1)
        throw std::invalid_argument("config: dataset.count must be >= 1");
    if (train.batch < 1) throw std::invalid_argument("config: train.batch must be >= 1");
    for (int it : train.iters)
        if (it < 0) throw std::invalid_argument("config: train.iters entries must be >= 0");
    if (crop_side() < 2 || crop_side() % 2 != 0)
        throw std::invalid_argument("config: crop side must be even and >= 2");
    if (crop_side() > image_size / 4)
        throw std::invalid_argument("config: crop side exceeds the stage-1 grid (H/4)");
    if (gen.z_dim < 1 || gen.w_dim < 1 || gen.embed_pairs < 1 || gen.layers < 1 || gen.width < 1)
        throw std::invalid_argument("config: generator dims must be positive");
    if (train.d_reg_every < 1) throw std::invalid_argument("config: train.d_reg_every must be >= 1");
    if (train.d_reg_eps <= 0.0f) throw std::invalid_argument("config: train.d_reg_eps must be positive");
}

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

    check_keys(j, {"seed", "image_size", "mode", "dataset", "out_dir", "generator",
                   "discriminator", "optimizer", "train"}, "");
    RunConfig cfg;
    read(j, "seed", cfg.seed);
    read(j, "image_size", cfg.image_size);
    if (j.contains("mode")) cfg.mode = run_mode_from_string(j.at("mode").get<std::string>());
    read(j, "out_dir", cfg.out_dir);

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, {"source", "count", "path"}, "dataset");
        read(d, "source", cfg.dataset_source);
        read(d, "count", cfg.dataset_count);
        read(d, "path", cfg.dataset_path);
    }
    if (j.contains("generator")) {
        const json& g = j.at("generator");
        check_keys(g, {"z_dim", "w_dim", "embed_pairs", "const_dim", "layers", "width",
                       "fourier_sigma", "lrelu_slope", "init_strategy"}, "generator");
        read(g, "z_dim", cfg.gen.z_dim);
        read(g, "w_dim", cfg.gen.w_dim);
        read(g, "embed_pairs", cfg.gen.embed_pairs);
        read(g, "const_dim", cfg.gen.const_dim);
        read(g, "layers", cfg.gen.layers);
        read(g, "width", cfg.gen.width);
        read(g, "fourier_sigma", cfg.gen.fourier_sigma);
        read(g, "lrelu_slope", cfg.gen.lrelu_slope);
        if (g.contains("init_strategy"))
            cfg.gen.init = init_strategy_from_string(g.at("init_strategy").get<std::string>());
    }
    if (j.contains("discriminator")) {
        const json& d = j.at("discriminator");
        check_keys(d, {"channels", "kernel", "stride", "pad", "lrelu_slope"}, "discriminator");
        read(d, "channels", cfg.disc.channels);
        read(d, "kernel", cfg.disc.kernel);
        read(d, "stride", cfg.disc.stride);
        read(d, "pad", cfg.disc.pad);
        read(d, "lrelu_slope", cfg.disc.lrelu_slope);
    }
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        check_keys(o, {"lr", "beta1", "beta2", "eps"}, "optimizer");
        read(o, "lr", cfg.optim.lr);
        read(o, "beta1", cfg.optim.beta1);
        read(o, "beta2", cfg.optim.beta2);
        read(o, "eps", cfg.optim.eps);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, {"batch", "iters", "lambda_patch", "d_reg_weight", "d_reg_every", "d_reg_eps",
                       "sample_interval", "record_wall_ms", "reset_d", "squared_patch_l2", "crop_side"},
                   "train");
        read(t, "batch", cfg.train.batch);
        if (t.contains("iters")) {
            const json& it = t.at("iters");
            if (!it.is_array() || it.size() != 3)
                throw std::invalid_argument("config: train.iters must be an array of 3 stage budgets");
            for (size_t i = 0; i < 3; ++i) cfg.train.iters[i] = it.at(i).get<int>();
        }
        read(t, "lambda_patch", cfg.train.lambda_patch);
        read(t, "d_reg_weight", cfg.train.d_reg_weight);
        read(t, "d_reg_every", cfg.train.d_reg_every);
        read(t, "d_reg_eps", cfg.train.d_reg_eps);
        read(t, "sample_interval", cfg.train.sample_interval);
        read(t, "record_wall_ms", cfg.train.record_wall_ms);
        read(t, "reset_d", cfg.train.reset_d);
        read(t, "squared_patch_l2", cfg.train.squared_patch_l2);
        read(t, "crop_side", cfg.train.crop_side);
    }
    cfg.validate();
    return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["image_size"] = cfg.image_size;
    j["mode"] = to_string(cfg.mode);
    j["out_dir"] = cfg.out_dir;
    j["dataset"] = {{"source", cfg.dataset_source}, {"count", cfg.dataset_count}, {"path", cfg.dataset_path}};
    j["generator"] = {{"z_dim", cfg.gen.z_dim},         {"w_dim", cfg.gen.w_dim},
                      {"embed_pairs", cfg.gen.embed_pairs}, {"const_dim", cfg.gen.const_dim},
                      {"layers", cfg.gen.layers},       {"width", cfg.gen.width},
                      {"fourier_sigma", cfg.gen.fourier_sigma}, {"lrelu_slope", cfg.gen.lrelu_slope},
                      {"init_strategy", to_string(cfg.gen.init)}};
    j["discriminator"] = {{"channels", cfg.disc.channels}, {"kernel", cfg.disc.kernel},
                          {"stride", cfg.disc.stride},     {"pad", cfg.disc.pad},
                          {"lrelu_slope", cfg.disc.lrelu_slope}};
    j["optimizer"] = {{"lr", cfg.optim.lr}, {"beta1", cfg.optim.beta1}, {"beta2", cfg.optim.beta2}, {"eps", cfg.optim.eps}};
    j["train"] = {{"batch", cfg.train.batch},
                  {"iters", cfg.train.iters},
                  {"lambda_patch", cfg.train.lambda_patch},
                  {"d_reg_weight", cfg.train.d_reg_weight},
                  {"d_reg_every", cfg.train.d_reg_every},
                  {"d_reg_eps", cfg.train.d_reg_eps},
                  {"sample_interval", cfg.train.sample_interval},
                  {"record_wall_ms", cfg.train.record_wall_ms},
                  {"reset_d", cfg.train.reset_d},
                  {"squared_patch_l2", cfg.train.squared_patch_l2},
                  {"crop_side", cfg.train.crop_side}};
    return j.dump(2) + "\n";
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

} // namespace inrpatch
