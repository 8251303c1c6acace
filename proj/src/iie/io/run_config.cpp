#include "iie/io/run_config.h"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "iie/train/metrics.h"  // fnv1a64

namespace iie {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& prefix,
                    const std::set<std::string>& allowed) {
    if (!j.is_object()) throw config_error("'" + prefix + "' must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw config_error("unknown key '" + (prefix.empty() ? key : prefix + "." + key) + "'");
}

template <class U>
U get_or(const json& j, const char* key, U fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<U>();
    } catch (const json::exception&) {
        throw config_error(std::string("key '") + key + "' has the wrong type");
    }
}

SolverSpec parse_solver(const json& j, const std::string& prefix) {
    reject_unknown(j, prefix, {"kind", "order", "r"});
    if (!j.contains("kind")) throw config_error("missing key '" + prefix + ".kind'");
    SolverSpec s;
    s.kind = solver_kind_from(j.at("kind").get<std::string>());
    s.order = get_or<int>(j, "order", 0);
    s.iterations = get_or<int>(j, "r", 0);
    s.validate();
    return s;
}

json solver_to_json(const SolverSpec& s) {
    json j;
    j["kind"] = solver_kind_name(s.kind);
    if (s.kind == SolverKind::rk || s.kind == SolverKind::pc) j["order"] = s.order;
    if (s.kind == SolverKind::iie) j["r"] = s.iterations;
    return j;
}

const std::set<std::string> kTrainKeys = {
    "max_lr",      "warmup_ratio", "warmup_steps",     "schedule",  "weight_decay",
    "grad_clip",   "batch_tokens", "total_steps",      "seq_len",   "eval_every",
    "eval_max_batches", "precision", "stage2",          "stage1_solver"};

TrainConfig parse_train(const json& j, const std::string& prefix, const TrainConfig& base,
                        bool allow_stage2) {
    reject_unknown(j, prefix, kTrainKeys);
    if (!allow_stage2 && (j.contains("stage2") || j.contains("stage1_solver")))
        throw config_error("'" + prefix + "' may not nest stage2/stage1_solver");
    TrainConfig t = base;
    t.max_lr = get_or<double>(j, "max_lr", t.max_lr);
    t.warmup_ratio = get_or<double>(j, "warmup_ratio", t.warmup_ratio);
    t.warmup_steps = get_or<int64_t>(j, "warmup_steps", t.warmup_steps);
    if (j.contains("schedule")) t.schedule = lr_schedule_from(j.at("schedule").get<std::string>());
    t.weight_decay = get_or<double>(j, "weight_decay", t.weight_decay);
    t.grad_clip = get_or<double>(j, "grad_clip", t.grad_clip);
    t.batch_tokens = get_or<int64_t>(j, "batch_tokens", t.batch_tokens);
    t.total_steps = get_or<int64_t>(j, "total_steps", t.total_steps);
    t.seq_len = get_or<int64_t>(j, "seq_len", t.seq_len);
    t.eval_every = get_or<int64_t>(j, "eval_every", t.eval_every);
    t.eval_max_batches = get_or<int64_t>(j, "eval_max_batches", t.eval_max_batches);
    if (j.contains("precision")) t.precision = precision_from(j.at("precision").get<std::string>());
    return t;
}

json train_to_json(const TrainConfig& t) {
    json j;
    j["max_lr"] = t.max_lr;
    j["warmup_ratio"] = t.warmup_ratio;
    j["warmup_steps"] = t.warmup_steps;
    j["schedule"] = lr_schedule_name(t.schedule);
    j["weight_decay"] = t.weight_decay;
    j["grad_clip"] = t.grad_clip;
    j["batch_tokens"] = t.batch_tokens;
    j["total_steps"] = t.total_steps;
    j["seq_len"] = t.seq_len;
    j["eval_every"] = t.eval_every;
    j["eval_max_batches"] = t.eval_max_batches;
    j["precision"] = precision_name(t.precision);
    return j;
}

}  // namespace

const char* precision_name(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

Precision precision_from(const std::string& s) {
    if (s == "f32") return Precision::f32;
    if (s == "f64") return Precision::f64;
    throw config_error("unknown precision '" + s + "' (f32|f64)");
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j, "", {"seed", "model", "train", "data", "distill"});

    RunConfig cfg;
    cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed);

    if (j.contains("model")) {
        const json& jm = j.at("model");
        reject_unknown(jm, "model",
                       {"vocab_size", "d_model", "n_layers", "n_heads", "d_ff", "max_seq_len",
                        "tie_embeddings", "rms_eps", "solver", "solver_site"});
        cfg.model.vocab_size = get_or<int64_t>(jm, "vocab_size", cfg.model.vocab_size);
        cfg.model.d_model = get_or<int64_t>(jm, "d_model", cfg.model.d_model);
        cfg.model.n_layers = get_or<int>(jm, "n_layers", cfg.model.n_layers);
        cfg.model.n_heads = get_or<int>(jm, "n_heads", cfg.model.n_heads);
        cfg.model.d_ff = get_or<int64_t>(jm, "d_ff", cfg.model.d_ff);
        cfg.model.max_seq_len = get_or<int64_t>(jm, "max_seq_len", cfg.model.max_seq_len);
        cfg.model.tie_embeddings = get_or<bool>(jm, "tie_embeddings", cfg.model.tie_embeddings);
        cfg.model.rms_eps = get_or<double>(jm, "rms_eps", cfg.model.rms_eps);
        if (jm.contains("solver")) cfg.model.solver = parse_solver(jm.at("solver"), "model.solver");
        if (jm.contains("solver_site"))
            cfg.model.solver_site = solver_site_from(jm.at("solver_site").get<std::string>());
        cfg.model.validate();
    }

    if (j.contains("train")) {
        const json& jt = j.at("train");
        cfg.train = parse_train(jt, "train", cfg.train, true);
        if (jt.contains("stage1_solver"))
            cfg.stage1_solver = parse_solver(jt.at("stage1_solver"), "train.stage1_solver");
        if (jt.contains("stage2")) {
            cfg.two_stage = true;
            TrainConfig base = cfg.train;
            base.schedule = LrSchedule::cosine;
            base.warmup_steps = 0;
            cfg.stage2 = parse_train(jt.at("stage2"), "train.stage2", base, false);
        }
    }

    if (j.contains("data")) {
        const json& jd = j.at("data");
        reject_unknown(jd, "data", {"corpus", "train_fraction"});
        cfg.data.corpus = get_or<std::string>(jd, "corpus", "");
        cfg.data.train_fraction = get_or<double>(jd, "train_fraction", cfg.data.train_fraction);
    }

    if (j.contains("distill")) {
        cfg.has_distill = true;
        const json& jd = j.at("distill");
        reject_unknown(jd, "distill", {"alpha", "beta", "tau", "token_fraction", "train"});
        cfg.distill.alpha = get_or<double>(jd, "alpha", cfg.distill.alpha);
        cfg.distill.beta = get_or<double>(jd, "beta", cfg.distill.beta);
        cfg.distill.tau = get_or<double>(jd, "tau", cfg.distill.tau);
        cfg.distill.token_fraction = get_or<double>(jd, "token_fraction", cfg.distill.token_fraction);
        TrainConfig base = cfg.train;
        base.total_steps = 0;  // 0 = derive from token_fraction at the call site
        if (jd.contains("train"))
            cfg.distill.train = parse_train(jd.at("train"), "distill.train", base, false);
        else
            cfg.distill.train = base;
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    json jm;
    jm["vocab_size"] = cfg.model.vocab_size;
    jm["d_model"] = cfg.model.d_model;
    jm["n_layers"] = cfg.model.n_layers;
    jm["n_heads"] = cfg.model.n_heads;
    jm["d_ff"] = cfg.model.d_ff;
    jm["max_seq_len"] = cfg.model.max_seq_len;
    jm["tie_embeddings"] = cfg.model.tie_embeddings;
    jm["rms_eps"] = cfg.model.rms_eps;
    jm["solver"] = solver_to_json(cfg.model.solver);
    jm["solver_site"] = solver_site_name(cfg.model.solver_site);
    j["model"] = jm;
    j["train"] = train_to_json(cfg.train);
    if (cfg.two_stage) {
        j["train"]["stage1_solver"] = solver_to_json(cfg.stage1_solver);
        j["train"]["stage2"] = train_to_json(cfg.stage2);
    }
    json jd;
    jd["corpus"] = cfg.data.corpus;
    jd["train_fraction"] = cfg.data.train_fraction;
    j["data"] = jd;
    if (cfg.has_distill) {
        json dj;
        dj["alpha"] = cfg.distill.alpha;
        dj["beta"] = cfg.distill.beta;
        dj["tau"] = cfg.distill.tau;
        dj["token_fraction"] = cfg.distill.token_fraction;
        dj["train"] = train_to_json(cfg.distill.train);
        j["distill"] = dj;
    }
    return j.dump(2);
}

std::string config_digest(const RunConfig& cfg) {
    const std::string text = run_config_to_json(cfg);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
    return buf;
}

IterationSchedule load_schedule(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open schedule '" + path + "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw config_error(std::string("schedule is not valid JSON: ") + e.what());
    }
    if (!j.is_array()) throw config_error("schedule file must be a JSON array of integers");
    IterationSchedule s;
    for (const auto& v : j) s.r.push_back(v.get<int>());
    return s;
}

void save_schedule(const IterationSchedule& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write schedule '" + path + "'");
    f << json(s.r).dump() << "\n";
}

}  // namespace iie
