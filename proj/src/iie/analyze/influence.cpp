#include "iie/analyze/influence.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iie/util/rng.h"

namespace iie {

void InfluenceReport::validate_range() const {
    auto check = [](double v) {
        if (!(v >= 0.0 && v <= 2.0))
            throw internal_error("influence value " + std::to_string(v) + " outside [0, 2]");
    };
    for (double v : block_bi) check(v);
    for (const auto& row : iter_influence)
        for (double v : row) check(v);
}

namespace {

// Pooled-mean cosine accumulator; zero-norm rows are excluded and counted.
struct CosAccum {
    double sum = 0;
    int64_t count = 0;
    int64_t skipped = 0;

    template <class T>
    void add_rows(const Tensor<T>& a, const Tensor<T>& b, int64_t d) {
        const int64_t rows = a.numel() / d;
        const T* av = a.data();
        const T* bv = b.data();
        for (int64_t r = 0; r < rows; ++r) {
            double dot = 0, na = 0, nb = 0;
            const T* ar = av + r * d;
            const T* br = bv + r * d;
            for (int64_t j = 0; j < d; ++j) {
                dot += static_cast<double>(ar[j]) * static_cast<double>(br[j]);
                na += static_cast<double>(ar[j]) * static_cast<double>(ar[j]);
                nb += static_cast<double>(br[j]) * static_cast<double>(br[j]);
            }
            if (na == 0.0 || nb == 0.0) {
                ++skipped;
                continue;
            }
            sum += dot / (std::sqrt(na) * std::sqrt(nb));
            ++count;
        }
    }

    double influence() const {
        if (count == 0) return 0.0;
        // clamp away f.p. dust just outside the cosine bounds
        return std::min(2.0, std::max(0.0, 1.0 - sum / static_cast<double>(count)));
    }
};

std::vector<int64_t> sample_window_starts(size_t corpus_len, int64_t seq_len, int n_samples,
                                          uint64_t seed) {
    const int64_t max_start = static_cast<int64_t>(corpus_len) - seq_len;
    if (max_start < 0)
        throw config_error("influence: corpus shorter than one sequence of " +
                           std::to_string(seq_len));
    Rng rng(seed);
    std::vector<int64_t> starts;
    starts.reserve(static_cast<size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i)
        starts.push_back(static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(max_start + 1))));
    return starts;
}

}  // namespace

template <class T>
InfluenceReport compute_influence(const Model<T>& model, const IterationSchedule& schedule,
                                  const std::vector<uint8_t>& corpus, int n_samples,
                                  int64_t seq_len, uint64_t seed) {
    if (n_samples < 1) throw param_error("influence: n_samples must be >= 1");
    schedule.validate(model.config());
    const auto& cfg = model.config();
    const int64_t d = cfg.d_model;
    const int sub_blocks = cfg.sub_block_count();

    std::vector<CosAccum> bi(static_cast<size_t>(cfg.n_layers));
    std::vector<std::vector<CosAccum>> iter(static_cast<size_t>(sub_blocks));
    for (int n = 0; n < sub_blocks; ++n)
        iter[static_cast<size_t>(n)].resize(static_cast<size_t>(1 + schedule.r[n]));

    const auto starts = sample_window_starts(corpus.size(), seq_len, n_samples, seed);
    for (int64_t start : starts) {
        std::vector<int32_t> tokens(static_cast<size_t>(seq_len));
        for (int64_t t = 0; t < seq_len; ++t)
            tokens[static_cast<size_t>(t)] = corpus[static_cast<size_t>(start + t)];

        ForwardTrace<T> trace;
        model.forward(tokens, 1, seq_len, schedule, &trace);

        for (int l = 0; l < cfg.n_layers; ++l) {
            const Tensor<T>& in = l == 0 ? trace.embed_out : trace.layer_outputs[l - 1];
            bi[static_cast<size_t>(l)].add_rows(in, trace.layer_outputs[l], d);
        }
        for (int n = 0; n < sub_blocks; ++n) {
            const auto& its = trace.iterates[static_cast<size_t>(n)];
            auto& accs = iter[static_cast<size_t>(n)];
            accs[0].add_rows(trace.subblock_inputs[static_cast<size_t>(n)], its[0], d);
            for (size_t i = 1; i < its.size(); ++i) accs[i].add_rows(its[i - 1], its[i], d);
        }
    }

    InfluenceReport report;
    report.sample_count = n_samples;
    for (const auto& a : bi) {
        report.block_bi.push_back(a.influence());
        report.skipped_rows += a.skipped;
    }
    for (const auto& row : iter) {
        std::vector<double> vals;
        for (const auto& a : row) {
            vals.push_back(a.influence());
            report.skipped_rows += a.skipped;
        }
        report.iter_influence.push_back(std::move(vals));
    }
    report.validate_range();
    return report;
}

template <class T>
std::vector<double> block_influence(const Model<T>& model, const IterationSchedule& schedule,
                                    const std::vector<uint8_t>& corpus, int n_samples,
                                    int64_t seq_len, uint64_t seed) {
    return compute_influence(model, schedule, corpus, n_samples, seq_len, seed).block_bi;
}

template <class T>
double rowwise_influence(const Tensor<T>& a, const Tensor<T>& b, int64_t d, int64_t* skipped) {
    check_same_shape(a, b, "rowwise_influence");
    CosAccum acc;
    acc.add_rows(a, b, d);
    if (skipped) *skipped = acc.skipped;
    return acc.influence();
}

ScheduleMode schedule_mode_from(const std::string& s) {
    if (s == "lower-bound" || s == "lower_bound") return ScheduleMode::lower_bound;
    if (s == "threshold") return ScheduleMode::threshold;
    if (s.rfind("budget", 0) == 0) return ScheduleMode::budget;
    throw config_error("unknown schedule mode '" + s + "' (lower-bound|threshold|budget=K)");
}

IterationSchedule derive_schedule(const InfluenceReport& report, ScheduleMode mode, int64_t budget,
                                  bool per_block_threshold) {
    const int sub_blocks = static_cast<int>(report.iter_influence.size());
    if (sub_blocks == 0) throw param_error("derive_schedule: empty report");
    IterationSchedule sched = IterationSchedule::zeros(sub_blocks);

    switch (mode) {
        case ScheduleMode::lower_bound:
            break;

        case ScheduleMode::threshold: {
            double global_tau = std::numeric_limits<double>::infinity();
            for (const auto& row : report.iter_influence) global_tau = std::min(global_tau, row[0]);
            for (int n = 0; n < sub_blocks; ++n) {
                const auto& row = report.iter_influence[static_cast<size_t>(n)];
                const double tau = per_block_threshold ? row[0] : global_tau;
                int keep = 0;
                // prefix rule: stop at the first below-threshold iteration
                for (size_t i = 1; i < row.size() && row[i] >= tau; ++i) ++keep;
                sched.r[static_cast<size_t>(n)] = keep;
            }
            break;
        }

        case ScheduleMode::budget: {
            int64_t available = 0;
            for (const auto& row : report.iter_influence)
                available += static_cast<int64_t>(row.size()) - 1;
            if (budget > available) {
                std::fprintf(stderr,
                             "warning: budget %lld exceeds the %lld available iterations; "
                             "clamping\n",
                             static_cast<long long>(budget), static_cast<long long>(available));
                budget = available;
            }
            for (int64_t picked = 0; picked < budget; ++picked) {
                // frontier = next unkept iteration of each sub-block
                int best = -1;
                double best_val = -1;
                for (int n = 0; n < sub_blocks; ++n) {
                    const auto& row = report.iter_influence[static_cast<size_t>(n)];
                    const int next = sched.r[static_cast<size_t>(n)] + 1;
                    if (next >= static_cast<int>(row.size())) continue;
                    const double v = row[static_cast<size_t>(next)];
                    if (v > best_val) {
                        best_val = v;
                        best = n;
                    }
                }
                if (best < 0) break;
                ++sched.r[static_cast<size_t>(best)];
            }
            break;
        }
    }
    return sched;
}

std::string heatmap_csv(const InfluenceReport& report) {
    std::string out = "sub_block,iteration,influence\n";
    char buf[96];
    for (size_t n = 0; n < report.iter_influence.size(); ++n)
        for (size_t i = 0; i < report.iter_influence[n].size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9g\n", n, i, report.iter_influence[n][i]);
            out += buf;
        }
    return out;
}

void export_heatmap(const InfluenceReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write heatmap csv '" + path + "'");
    f << heatmap_csv(report);
}

std::vector<std::vector<double>> parse_heatmap_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("sub_block,iteration,influence", 0) != 0)
        throw io_error("heatmap csv: missing header");
    std::vector<std::vector<double>> matrix;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t c1 = line.find(',');
        size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw io_error("heatmap csv: malformed row '" + line + "'");
        const size_t sb = std::stoul(line.substr(0, c1));
        const size_t it = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
        const double v = std::stod(line.substr(c2 + 1));
        if (matrix.size() <= sb) matrix.resize(sb + 1);
        if (matrix[sb].size() <= it) matrix[sb].resize(it + 1);
        matrix[sb][it] = v;
    }
    return matrix;
}

std::string report_to_json(const InfluenceReport& report) {
    nlohmann::json j;
    j["block_bi"] = report.block_bi;
    j["iter_influence"] = report.iter_influence;
    j["sample_count"] = report.sample_count;
    j["skipped_rows"] = report.skipped_rows;
    j["config_digest"] = report.config_digest;
    return j.dump(2);
}

InfluenceReport report_from_json(const std::string& text) {
    InfluenceReport r;
    nlohmann::json j = nlohmann::json::parse(text);
    r.block_bi = j.at("block_bi").get<std::vector<double>>();
    r.iter_influence = j.at("iter_influence").get<std::vector<std::vector<double>>>();
    r.sample_count = j.at("sample_count").get<int64_t>();
    r.skipped_rows = j.at("skipped_rows").get<int64_t>();
    r.config_digest = j.at("config_digest").get<std::string>();
    return r;
}

#define IIE_INSTANTIATE(T)                                                                        \
    template InfluenceReport compute_influence(const Model<T>&, const IterationSchedule&,         \
                                               const std::vector<uint8_t>&, int, int64_t,         \
                                               uint64_t);                                         \
    template std::vector<double> block_influence(const Model<T>&, const IterationSchedule&,       \
                                                 const std::vector<uint8_t>&, int, int64_t,       \
                                                 uint64_t);                                       \
    template double rowwise_influence(const Tensor<T>&, const Tensor<T>&, int64_t, int64_t*);

IIE_INSTANTIATE(float)
IIE_INSTANTIATE(double)

#undef IIE_INSTANTIATE

}  // namespace iie
