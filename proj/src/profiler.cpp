#include "inrpatch/profiler.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace inrpatch {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int64_t median_i(std::vector<int64_t> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

ModeProfile profile_mode(const RunConfig& base, RunMode mode,
                         const std::shared_ptr<const Dataset>& data, int k) {
    RunConfig cfg = base;
    cfg.mode = mode;
    Trainer trainer(cfg, data);

    StageConfig sc = mode == RunMode::Multistage ? multistage_config(cfg, 1) : baseline_config(cfg);
    sc.iters = k;

    GeneratorParams gen = init_generator(cfg.gen, cfg.image_size, mix_seed(cfg.seed, 1),
                                         mode == RunMode::Multistage ? 1 : 3);
    DiscConfig dc = cfg.disc;
    dc.in_side = sc.crop_side;
    DiscParams disc = init_discriminator(dc, mix_seed(cfg.seed, 2));
    Rng rng(mix_seed(cfg.seed, 3));
    AdamState adam_g{cfg.optim}, adam_d{cfg.optim};
    int global_iter = 0;
    std::vector<TrainingMetrics> log =
        trainer.run_stage(sc, gen, nullptr, disc, adam_g, adam_d, rng, global_iter, nullptr);

    ModeProfile p;
    p.mode = mode;
    std::vector<double> wall;
    std::vector<int64_t> genf, totf;
    for (const auto& m : log) {
        wall.push_back(m.wall_ms);
        genf.push_back(m.gen_fwd);
        totf.push_back(m.fwd_count);
        p.peak_floats = std::max(p.peak_floats, m.peak_floats);
    }
    p.median_wall_ms = median(std::move(wall));
    p.gen_fwd = median_i(std::move(genf));
    p.fwd_total = median_i(std::move(totf));
    return p;
}

} // namespace

const ModeProfile& ProfileReport::row(RunMode m) const {
    for (const auto& r : rows)
        if (r.mode == m) return r;
    throw std::logic_error("profile report missing mode " + to_string(m));
}

std::string ProfileReport::table() const {
    const ModeProfile& img = row(RunMode::ImageBased);
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "profile: H=%d batch=%d iters=%d\n", H, batch, iters);
    os << line;
    std::snprintf(line, sizeof(line), "%-12s %14s %14s %14s %12s %8s %8s\n", "mode", "gen_fwd/iter",
                  "fwd_total/iter", "peak_floats", "wall_ms", "mem_x", "time_x");
    os << line;
    for (const auto& r : rows) {
        const double memx = img.peak_floats ? static_cast<double>(r.peak_floats) / static_cast<double>(img.peak_floats) : 0.0;
        const double timex = img.median_wall_ms > 0.0 ? r.median_wall_ms / img.median_wall_ms : 0.0;
        std::snprintf(line, sizeof(line), "%-12s %14lld %14lld %14lld %12.3f %8.4f %8.4f\n",
                      to_string(r.mode).c_str(), static_cast<long long>(r.gen_fwd),
                      static_cast<long long>(r.fwd_total), static_cast<long long>(r.peak_floats),
                      r.median_wall_ms, memx, timex);
        os << line;
    }
    const ModeProfile& ours = row(RunMode::Multistage);
    const double ratio = ours.gen_fwd ? static_cast<double>(img.gen_fwd) / static_cast<double>(ours.gen_fwd) : 0.0;
    std::snprintf(line, sizeof(line), "gen_fwd ratio image_based : multistage = %.4f : 1\n", ratio);
    os << line;
    return os.str();
}

ProfileReport run_profile(const RunConfig& base, const std::shared_ptr<const Dataset>& data, int k) {
    if (k < 1) throw std::invalid_argument("run_profile: need at least one iteration");
    // warm the pyramid levels all modes touch, outside the timed loops
    data->level(base.image_size);
    data->level(base.image_size / 2);
    data->level(base.image_size / 4);
    ProfileReport rep;
    rep.H = base.image_size;
    rep.batch = base.train.batch;
    rep.iters = k;
    rep.rows.push_back(profile_mode(base, RunMode::ImageBased, data, k));
    rep.rows.push_back(profile_mode(base, RunMode::PatchBased, data, k));
    rep.rows.push_back(profile_mode(base, RunMode::Multistage, data, k));
    return rep;
}

} // namespace inrpatch
