// iielab: train / evaluate / analyze / compress the iterative-implicit-Euler
// language model lab from one binary. Every subcommand ends its stdout with a
// machine-parseable `key=value ...` line.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "iie/analyze/influence.h"
#include "iie/distill/distill.h"
#include "iie/io/checkpoint.h"
#include "iie/io/run_config.h"
#include "iie/kernels/kernels.h"
#include "iie/model/decode.h"
#include "iie/model/flops.h"
#include "iie/solver/scalar_ivp.h"
#include "iie/train/trainer.h"
#include "iie/util/parallel.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace iie;

namespace {

void apply_deterministic() {
    set_max_workers(1);
    kern::select_backend(kern::Backend::scalar);
}

std::string make_metadata(const RunConfig& rc, const IterationSchedule& sched, int64_t step,
                          const std::string& metrics_csv, double val_loss, Precision prec) {
    json j;
    j["config"] = json::parse(run_config_to_json(rc));
    j["schedule"] = sched.r;
    j["step"] = step;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(metrics_csv.data(), metrics_csv.size())));
    j["metrics_digest"] = buf;
    j["val_loss"] = val_loss;
    j["precision"] = precision_name(prec);
    return j.dump(2);
}

struct LoadedModel {
    RunConfig rc;
    IterationSchedule schedule;
    Precision precision = Precision::f32;
    Model<float> f32;
    Model<double> f64;
    int64_t step = 0;
};

LoadedModel load_model_any(const std::string& path) {
    const LoadedCheckpoint ckpt = load_checkpoint(path);
    json meta = json::parse(ckpt.metadata);
    LoadedModel m;
    m.rc = parse_run_config(meta.at("config").dump());
    m.schedule.r = meta.at("schedule").get<std::vector<int>>();
    m.precision = precision_from(meta.at("precision").get<std::string>());
    m.step = meta.value("step", 0);
    if (m.precision == Precision::f32)
        m.f32 = model_from_checkpoint<float>(ckpt, m.rc.model);
    else
        m.f64 = model_from_checkpoint<double>(ckpt, m.rc.model);
    return m;
}

void load_and_split(const RunConfig& rc, std::vector<uint8_t>& train, std::vector<uint8_t>& val) {
    if (rc.data.corpus.empty()) throw config_error("missing key 'data.corpus'");
    const std::vector<uint8_t> bytes = load_corpus(rc.data.corpus);
    split_corpus(bytes, rc.data.train_fraction, train, val);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

template <class T>
int run_train_typed(RunConfig rc, const std::string& out_dir) {
    std::vector<uint8_t> train_bytes, val_bytes;
    load_and_split(rc, train_bytes, val_bytes);
    rc.train.seed = rc.seed;
    rc.stage2.seed = rc.seed;

    const IterationSchedule schedule = IterationSchedule::full(rc.model);
    TrainResult<T> result;
    if (rc.two_stage) {
        result = two_stage_train<T>(rc.model, rc.stage1_solver, rc.train, rc.stage2, train_bytes,
                                    val_bytes, rc.seed);
    } else {
        Model<T> model = Model<T>::init(rc.model, rc.seed);
        result = train_model(model, schedule, rc.train, train_bytes, val_bytes);
    }

    fs::create_directories(out_dir);
    const std::string csv = result.log.to_csv();
    result.log.write_csv(out_dir + "/metrics.csv");
    {
        std::ofstream f(out_dir + "/config.json", std::ios::binary);
        f << run_config_to_json(rc) << "\n";
    }
    const int64_t total =
        rc.two_stage ? rc.train.total_steps + rc.stage2.total_steps : rc.train.total_steps;
    save_model_checkpoint(out_dir + "/final.iiel", result.final_model,
                          make_metadata(rc, schedule, total, csv, result.final_val_loss,
                                        rc.train.precision));
    save_model_checkpoint(out_dir + "/best.iiel", result.best_model,
                          make_metadata(rc, schedule, result.best_step, csv, result.best_val_loss,
                                        rc.train.precision));

    std::printf("status=ok steps=%lld final_val_loss=%.6f final_ppl=%.4f best_val_loss=%.6f "
                "best_step=%lld out=%s\n",
                static_cast<long long>(total), result.final_val_loss,
                std::exp(result.final_val_loss), result.best_val_loss,
                static_cast<long long>(result.best_step), out_dir.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, int64_t seed_override,
              const std::string& solver_override, int r_override, bool deterministic) {
    RunConfig rc = load_run_config(config_path);
    if (seed_override >= 0) rc.seed = static_cast<uint64_t>(seed_override);
    if (!solver_override.empty()) {
        SolverSpec s;
        s.kind = solver_kind_from(solver_override);
        if (s.kind == SolverKind::rk || s.kind == SolverKind::pc)
            s.order = r_override > 0 ? r_override : 2;
        if (s.kind == SolverKind::iie) s.iterations = r_override >= 0 ? r_override : 3;
        s.validate();
        rc.model.solver = s;
    } else if (r_override >= 0) {
        if (rc.model.solver.kind != SolverKind::iie)
            throw config_error("--r applies to the iie solver");
        rc.model.solver.iterations = r_override;
        rc.model.solver.validate();
    }
    if (deterministic) {
        apply_deterministic();
        rc.train.precision = Precision::f64;
        rc.stage2.precision = Precision::f64;
    }
    rc.model.validate();
    rc.train.validate();
    if (rc.two_stage) rc.stage2.validate();
    return rc.train.precision == Precision::f64 ? run_train_typed<double>(rc, out_dir)
                                                : run_train_typed<float>(rc, out_dir);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

template <class T>
int run_eval_typed(const Model<T>& model, const IterationSchedule& sched,
                   const std::vector<uint8_t>& corpus, int64_t seq_len, int64_t batch_seq) {
    const double loss = evaluate(model, sched, corpus, seq_len, batch_seq, 0);
    std::printf("loss=%.6f ppl=%.4f seq_len=%lld\n", loss, std::exp(loss),
                static_cast<long long>(seq_len));
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path) {
    LoadedModel m = load_model_any(ckpt_path);
    const std::vector<uint8_t> corpus = load_corpus(corpus_path);
    const int64_t seq = m.rc.train.seq_len;
    const int64_t bs = m.rc.train.batch_sequences();
    return m.precision == Precision::f64
               ? run_eval_typed(m.f64, m.schedule, corpus, seq, bs)
               : run_eval_typed(m.f32, m.schedule, corpus, seq, bs);
}

// ---------------------------------------------------------------------------
// influence / schedule
// ---------------------------------------------------------------------------

int cmd_influence(const std::string& ckpt_path, const std::string& corpus_path, int samples,
                  const std::string& out_csv, std::string report_path, int64_t seed) {
    LoadedModel m = load_model_any(ckpt_path);
    const std::vector<uint8_t> corpus = load_corpus(corpus_path);
    InfluenceReport report =
        m.precision == Precision::f64
            ? compute_influence(m.f64, m.schedule, corpus, samples, m.rc.train.seq_len, seed)
            : compute_influence(m.f32, m.schedule, corpus, samples, m.rc.train.seq_len, seed);
    report.config_digest = config_digest(m.rc);
    export_heatmap(report, out_csv);
    if (report_path.empty()) report_path = out_csv + ".report.json";
    {
        std::ofstream f(report_path, std::ios::binary);
        if (!f) throw io_error("cannot write report '" + report_path + "'");
        f << report_to_json(report) << "\n";
    }
    double min_initial = 2.0;
    for (const auto& row : report.iter_influence) min_initial = std::min(min_initial, row[0]);
    std::printf("sub_blocks=%zu samples=%d skipped_rows=%lld min_initial=%.6g heatmap=%s\n",
                report.iter_influence.size(), samples,
                static_cast<long long>(report.skipped_rows), min_initial, out_csv.c_str());
    return 0;
}

int cmd_schedule(const std::string& report_path, const std::string& mode_str,
                 const std::string& out_path, bool per_block) {
    std::ifstream f(report_path);
    if (!f) throw config_error("cannot open report '" + report_path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    InfluenceReport report;
    if (report_path.size() > 5 && report_path.substr(report_path.size() - 5) == ".json")
        report = report_from_json(ss.str());
    else
        report.iter_influence = parse_heatmap_csv(ss.str());

    const ScheduleMode mode = schedule_mode_from(mode_str);
    int64_t budget = 0;
    if (mode == ScheduleMode::budget) {
        const auto eq = mode_str.find('=');
        if (eq == std::string::npos)
            throw config_error("budget mode needs a count: --mode budget=K");
        budget = std::stoll(mode_str.substr(eq + 1));
    }
    const IterationSchedule sched = derive_schedule(report, mode, budget, per_block);
    save_schedule(sched, out_path);
    std::printf("mode=%s sub_blocks=%lld kept_iterations=%lld out=%s\n", mode_str.c_str(),
                static_cast<long long>(sched.size()),
                static_cast<long long>(sched.total_iterations()), out_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// distill
// ---------------------------------------------------------------------------

template <class T>
int run_distill_typed(const Model<T>& teacher, LoadedModel& meta, RunConfig rc,
                      const IterationSchedule& student_sched, const std::string& out_dir) {
    std::vector<uint8_t> train_bytes, val_bytes;
    load_and_split(rc, train_bytes, val_bytes);

    DistillConfig dc = rc.distill;
    if (dc.train.total_steps <= 0)
        dc.train.total_steps = dc.steps_from_fraction(meta.rc.train.total_steps);
    dc.train.seed = rc.seed;
    dc.validate();

    ModelConfig student_cfg = teacher.config();
    if (teacher.config().solver.kind == SolverKind::pc) student_cfg.solver = SolverSpec::euler();
    student_sched.validate(student_cfg);

    DistillResult<T> result = distill(teacher, meta.schedule, student_cfg, student_sched, dc,
                                      train_bytes, val_bytes);

    fs::create_directories(out_dir);
    const std::string csv = result.log.to_csv();
    result.log.write_csv(out_dir + "/metrics.csv");
    RunConfig student_rc = rc;
    student_rc.model = student_cfg;
    student_rc.has_distill = true;
    student_rc.distill = dc;
    {
        std::ofstream f(out_dir + "/config.json", std::ios::binary);
        f << run_config_to_json(student_rc) << "\n";
    }
    save_model_checkpoint(out_dir + "/student.iiel", result.student,
                          make_metadata(student_rc, student_sched, dc.train.total_steps, csv,
                                        result.final_val_loss, dc.train.precision));
    std::printf("status=ok steps=%lld warmstart_val_loss=%.6f final_val_loss=%.6f out=%s\n",
                static_cast<long long>(dc.train.total_steps), result.warmstart_val_loss,
                result.final_val_loss, out_dir.c_str());
    return 0;
}

int cmd_distill(const std::string& teacher_path, const std::string& schedule_path,
                const std::string& config_path, const std::string& out_dir, bool deterministic) {
    LoadedModel teacher = load_model_any(teacher_path);
    RunConfig rc = load_run_config(config_path);
    if (deterministic) {
        apply_deterministic();
        rc.distill.train.precision = Precision::f64;
    }
    IterationSchedule sched;
    if (!schedule_path.empty()) {
        sched = load_schedule(schedule_path);
    } else {
        ModelConfig scfg = teacher.rc.model;
        if (scfg.solver.kind == SolverKind::pc) scfg.solver = SolverSpec::euler();
        sched = IterationSchedule::zeros(scfg.sub_block_count());  // lower bound by default
    }
    if (teacher.precision != rc.distill.train.precision)
        throw config_error("teacher checkpoint precision differs from distill.train.precision");
    return teacher.precision == Precision::f64
               ? run_distill_typed(teacher.f64, teacher, rc, sched, out_dir)
               : run_distill_typed(teacher.f32, teacher, rc, sched, out_dir);
}

// ---------------------------------------------------------------------------
// flops / bench
// ---------------------------------------------------------------------------

int cmd_flops(const std::string& ckpt_path, const std::string& config_path,
              const std::string& schedule_path, int64_t ctx) {
    ModelConfig cfg;
    IterationSchedule sched;
    if (!ckpt_path.empty()) {
        LoadedModel m = load_model_any(ckpt_path);
        cfg = m.rc.model;
        sched = m.schedule;
    } else if (!config_path.empty()) {
        cfg = load_run_config(config_path).model;
        sched = IterationSchedule::full(cfg);
    } else {
        throw config_error("flops: provide --ckpt or --config");
    }
    if (!schedule_path.empty()) sched = load_schedule(schedule_path);

    const int64_t evals = count_block_evals(cfg, sched);
    const int64_t base = count_block_evals(cfg, IterationSchedule::zeros(cfg.sub_block_count()));
    const FlopsEstimate fl = flops_estimate(cfg, sched, ctx);
    std::printf("sub_blocks=%d evals_per_token=%lld eval_ratio=%.2f "
                "total_correction_iterations=%lld flops_per_token=%.4g\n",
                cfg.sub_block_count(), static_cast<long long>(evals),
                static_cast<double>(evals) / static_cast<double>(base),
                static_cast<long long>(sched.total_iterations()), fl.total);
    return 0;
}

int cmd_bench(const std::string& ckpt_path, int prompt_len, int gen_len, int runs,
              const std::string& schedule_path, int64_t seed) {
    LoadedModel m = load_model_any(ckpt_path);
    IterationSchedule sched = m.schedule;
    if (!schedule_path.empty()) sched = load_schedule(schedule_path);
    const BenchResult r =
        m.precision == Precision::f64
            ? benchmark_decode(m.f64, sched, prompt_len, gen_len, runs, seed)
            : benchmark_decode(m.f32, sched, prompt_len, gen_len, runs, seed);
    std::printf("tokens_per_sec=%.2f evals_per_token=%.0f runs=%d prompt_len=%d gen_len=%d\n",
                r.tokens_per_sec, r.evals_per_token, r.runs, r.prompt_len, r.gen_len);
    return 0;
}

// ---------------------------------------------------------------------------
// ode-check
// ---------------------------------------------------------------------------

int cmd_ode_check() {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::printf("%-24s %s\n", name, ok ? "pass" : "FAIL");
        if (!ok) ++failures;
    };
    auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

    const ScalarIvp ivp{-2.0, 1.0, 0.25, 1};

    check("explicit_euler",
          near(solve_scalar_ivp(ivp, IvpMethod::explicit_euler).back(), 0.5, 1e-12));
    check("implicit_exact",
          near(solve_scalar_ivp(ivp, IvpMethod::implicit_exact).back(), 2.0 / 3.0, 1e-12));

    const double expected[4] = {0.5, 0.75, 0.625, 0.6875};
    bool iter_ok = true;
    for (int r = 0; r <= 3; ++r)
        iter_ok = iter_ok && near(solve_scalar_ivp(ivp, IvpMethod::iie, r).back(), expected[r], 1e-12);
    check("iie_iterates", iter_ok);

    // error contracts geometrically with ratio |h*lambda| toward the exact step
    const double ystar = 2.0 / 3.0;
    bool contraction_ok = true;
    double prev = std::abs(solve_scalar_ivp(ivp, IvpMethod::iie, 0).back() - ystar);
    for (int r = 1; r <= 6; ++r) {
        const double err = std::abs(solve_scalar_ivp(ivp, IvpMethod::iie, r).back() - ystar);
        contraction_ok = contraction_ok && near(err, 0.5 * prev, 1e-12);
        prev = err;
    }
    check("contraction", contraction_ok);

    check("iie_fixed_point",
          std::abs(solve_scalar_ivp(ivp, IvpMethod::iie, 40).back() - ystar) < 1e-10);

    bool diverged = false;
    try {
        solve_scalar_ivp(ScalarIvp{-5.0, 1.0, 0.5, 1}, IvpMethod::iie, 2);
    } catch (const divergence_error&) {
        diverged = true;
    }
    check("divergence_guard", diverged);

    std::printf("explicit_euler=%s implicit_exact=%s iie_fixed_point=%s contraction=%s "
                "divergence_guard=%s\n",
                failures == 0 ? "pass" : "fail", failures == 0 ? "pass" : "fail",
                failures == 0 ? "pass" : "fail", failures == 0 ? "pass" : "fail",
                diverged ? "pass" : "fail");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iterative implicit Euler transformer lab"};
    app.require_subcommand(1);

    bool deterministic = false;
    app.add_flag("--deterministic", deterministic,
                 "single-threaded scalar-kernel 64-bit mode for oracle runs");

    std::string config_path, out_dir, ckpt_path, corpus_path, schedule_path, report_path,
        mode_str, solver_override;
    int64_t seed_override = -1, ctx = 128, bench_seed = 7;
    int r_override = -1, samples = 8, prompt_len = 16, gen_len = 32, runs = 5;
    bool per_block = false;

    CLI::App* train = app.add_subcommand("train", "train a model from a config");
    train->add_option("--config", config_path)->required();
    train->add_option("--out", out_dir)->required();
    train->add_option("--seed", seed_override);
    train->add_option("--solver", solver_override);
    train->add_option("--r", r_override);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    eval->add_option("--ckpt", ckpt_path)->required();
    eval->add_option("--corpus", corpus_path)->required();

    CLI::App* influence = app.add_subcommand("influence", "block / iteration influence analysis");
    influence->add_option("--ckpt", ckpt_path)->required();
    influence->add_option("--corpus", corpus_path)->required();
    influence->add_option("--samples", samples);
    influence->add_option("--out", out_dir)->required();
    influence->add_option("--report", report_path);
    influence->add_option("--seed", bench_seed);

    CLI::App* schedule = app.add_subcommand("schedule", "derive an iteration schedule");
    schedule->add_option("--report", report_path)->required();
    schedule->add_option("--mode", mode_str)->required();
    schedule->add_option("--out", out_dir)->required();
    schedule->add_flag("--per-block-threshold", per_block);

    CLI::App* distill = app.add_subcommand("distill", "distill a teacher into a schedule");
    distill->add_option("--teacher", ckpt_path)->required();
    distill->add_option("--schedule", schedule_path);
    distill->add_option("--config", config_path)->required();
    distill->add_option("--out", out_dir)->required();

    CLI::App* flops = app.add_subcommand("flops", "block-evaluation and FLOP accounting");
    flops->add_option("--ckpt", ckpt_path);
    flops->add_option("--config", config_path);
    flops->add_option("--schedule", schedule_path);
    flops->add_option("--ctx", ctx);

    CLI::App* bench = app.add_subcommand("bench", "autoregressive decode benchmark");
    bench->add_option("--ckpt", ckpt_path)->required();
    bench->add_option("--prompt-len", prompt_len);
    bench->add_option("--gen-len", gen_len);
    bench->add_option("--runs", runs);
    bench->add_option("--schedule", schedule_path);
    bench->add_option("--seed", bench_seed);

    CLI::App* ode = app.add_subcommand("ode-check", "scalar ODE oracle suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (deterministic) apply_deterministic();
        if (train->parsed())
            return cmd_train(config_path, out_dir, seed_override, solver_override, r_override,
                             deterministic);
        if (eval->parsed()) return cmd_eval(ckpt_path, corpus_path);
        if (influence->parsed())
            return cmd_influence(ckpt_path, corpus_path, samples, out_dir, report_path, bench_seed);
        if (schedule->parsed()) return cmd_schedule(report_path, mode_str, out_dir, per_block);
        if (distill->parsed())
            return cmd_distill(ckpt_path, schedule_path, config_path, out_dir, deterministic);
        if (flops->parsed()) return cmd_flops(ckpt_path, config_path, schedule_path, ctx);
        if (bench->parsed())
            return cmd_bench(ckpt_path, prompt_len, gen_len, runs, schedule_path, bench_seed);
        if (ode->parsed()) return cmd_ode_check();
    } catch (const config_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const param_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const divergence_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
    return 2;
}
