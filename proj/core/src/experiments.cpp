// Copyright 2026 The cliqueformer-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cliqueformer/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cliqueformer/checkpoint.hpp"
#include "cliqueformer/rng.hpp"
#include "json.hpp"

namespace cliqueformer {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kCliqueformer: return "cliqueformer";
    case Method::kGradAscent: return "gradasc";
    case Method::kRwr: return "rwr";
    case Method::kComs: return "coms";
    case Method::kTransformer: return "transformer";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  for (Method m : {Method::kCliqueformer, Method::kGradAscent, Method::kRwr, Method::kComs,
                   Method::kTransformer}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(s) +
                              "' (cliqueformer|gradasc|rwr|coms|transformer)");
}

namespace {

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw std::invalid_argument("bad value '" + std::string(s) + "' for " + std::string(what));
  }
  return v;
}

int latent_dim_from_name(std::string_view name) {
  constexpr std::string_view prefix = "latrbf";
  if (name.substr(0, prefix.size()) != prefix) return -1;
  const int dz = parse_number<int>(name.substr(prefix.size()), "task name");
  if (dz < 3 || dz % 2 == 0) {
    throw std::invalid_argument("task " + std::string(name) + ": d_z must be odd and >= 3");
  }
  return dz;
}

}  // namespace

TaskSpec task_spec_from_name(std::string_view name) {
  TaskSpec spec;
  spec.name = std::string(name);
  if (spec.is_tfbind()) return spec;
  if (latent_dim_from_name(name) < 0) {
    throw std::invalid_argument("unknown task '" + std::string(name) +
                                "' (latrbf<d_z> such as latrbf11, or tfbind8)");
  }
  return spec;
}

TaskInstance build_task(const TaskSpec& spec) {
  TaskInstance inst;
  inst.name = spec.name;
  if (spec.is_tfbind()) {
    if (spec.data_path.empty()) throw std::invalid_argument("tfbind8 needs a data path");
    TfBindData tf = load_tfbind8(spec.data_path);
    inst.train = percentile_filter(tf.full, spec.percentile);
    inst.oracle = tf.oracle.with_stats(inst.train.stats);
    return inst;
  }
  const int dz = latent_dim_from_name(spec.name);
  auto [task, full] =
      generate_latent_rbf((dz - 1) / 2, spec.observed_dim, spec.n_samples, spec.task_seed);
  task.validity_tolerance = spec.validity_tolerance;
  inst.train = percentile_filter(full, spec.percentile);
  inst.oracle = make_oracle(task, inst.train.stats);
  inst.latent = std::move(task);
  return inst;
}

Metric metric_from_string(std::string_view s) {
  const auto of = s.find("of");
  if (s.substr(0, 3) != "top" || of == std::string_view::npos) {
    throw std::invalid_argument("metric must look like top10of1000, got '" + std::string(s) + "'");
  }
  Metric m;
  m.top_k = parse_number<Index>(s.substr(3, of - 3), "metric");
  m.candidates = parse_number<Index>(s.substr(of + 2), "metric");
  if (m.top_k < 1 || m.top_k > m.candidates) {
    throw std::invalid_argument("metric: need 1 <= k <= candidates");
  }
  return m;
}

std::string to_string(const Metric& m) {
  return "top" + std::to_string(m.top_k) + "of" + std::to_string(m.candidates);
}

// ---------------------------------------------------------------------------
// Evaluation

EvalResult evaluate_candidates(const OracleHandle& oracle, const Matrix& candidates,
                               Index top_k) {
  if (candidates.rows() == 0) throw std::invalid_argument("evaluate_candidates: no candidates");
  if (top_k < 1 || top_k > candidates.rows()) {
    throw std::invalid_argument("evaluate_candidates: top_k must lie in [1, " +
                                std::to_string(candidates.rows()) + "]");
  }
  std::vector<double> scores(static_cast<std::size_t>(candidates.rows()));
  Index valid = 0;
  for (Index r = 0; r < candidates.rows(); ++r) {
    const Vector x = candidates.row(r).transpose();
    const OracleResult res = oracle.raw({x.data(), static_cast<std::size_t>(x.size())});
    valid += res.valid ? 1 : 0;
    scores[static_cast<std::size_t>(r)] = res.valid ? normalize_score(oracle.stats(), res.raw) : 0.0;
  }
  std::partial_sort(scores.begin(), scores.begin() + top_k, scores.end(), std::greater<>());
  EvalResult out;
  out.candidates = candidates.rows();
  out.top_k = top_k;
  double mean = 0.0;
  for (Index k = 0; k < top_k; ++k) mean += scores[static_cast<std::size_t>(k)];
  mean /= static_cast<double>(top_k);
  double var = 0.0;
  for (Index k = 0; k < top_k; ++k) {
    const double d = scores[static_cast<std::size_t>(k)] - mean;
    var += d * d;
  }
  out.score = mean;
  out.topk_std = std::sqrt(var / static_cast<double>(top_k));
  out.validity = static_cast<double>(valid) / static_cast<double>(candidates.rows());
  return out;
}

AggregateResult aggregate(const std::vector<EvalResult>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no rows");
  AggregateResult a;
  a.task = rows.front().task;
  a.method = rows.front().method;
  a.per_seed = rows;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    a.mean_score += r.score / n;
    a.mean_topk_std += r.topk_std / n;
    a.mean_validity += r.validity / n;
  }
  double var = 0.0;
  for (const auto& r : rows) var += (r.score - a.mean_score) * (r.score - a.mean_score);
  a.seed_std = std::sqrt(var / n);
  return a;
}

// ---------------------------------------------------------------------------
// Run configuration

RunConfig default_run_config(const TaskSpec& task, Method method) {
  RunConfig c;
  c.task = task;
  c.method = method;
  if (task.is_tfbind()) {
    c.model.layout = make_chain(4, 3, 1);
    c.design.steps = 1000;
    c.design.weight_decay = 0.5;
    c.train.steps = 20000;
    return c;
  }
  const int dz = latent_dim_from_name(task.name);
  int n_clique = (dz - 1) / 2;
  switch (dz) {
    case 11: n_clique = 10; break;
    case 31: n_clique = 18; break;
    case 41: n_clique = 20; break;
    case 61: n_clique = 28; break;
    default: break;
  }
  c.model.layout = make_chain(n_clique, 3, 1);
  c.design.steps = 50;
  c.design.weight_decay = 0.5;
  c.train.steps = 10000;
  return c;
}

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

#define CQF_NUM(KEY, EXPR, TYPE) \
  {KEY, [](RunConfig& c, const std::string& v) { c.EXPR = parse_number<TYPE>(v, KEY); }}

std::vector<std::uint64_t> parse_seeds(const std::string& v) {
  std::vector<std::uint64_t> out;
  if (v.find(',') == std::string::npos) {
    const auto n = parse_number<std::uint64_t>(v, "run.seeds");
    for (std::uint64_t s = 0; s < n; ++s) out.push_back(s);
  } else {
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<std::uint64_t>(item, "run.seeds"));
  }
  if (out.empty()) throw std::invalid_argument("run.seeds: no seeds");
  return out;
}

void set_layout(RunConfig& c, int n, int dc, int dk) { c.model.layout = make_chain(n, dc, dk); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      CQF_NUM("task.n_samples", task.n_samples, Index),
      CQF_NUM("task.observed_dim", task.observed_dim, Index),
      CQF_NUM("task.percentile", task.percentile, double),
      CQF_NUM("task.validity_tolerance", task.validity_tolerance, double),
      CQF_NUM("task.seed", task.task_seed, std::uint64_t),
      {"task.data_path", [](RunConfig& c, const std::string& v) { c.task.data_path = v; }},
      CQF_NUM("model.d_model", model.d_model, Index),
      CQF_NUM("model.n_blocks", model.n_blocks, Index),
      CQF_NUM("model.n_heads", model.n_heads, Index),
      CQF_NUM("model.mlp_hidden", model.mlp_hidden, Index),
      CQF_NUM("model.ff_hidden", model.ff_hidden, Index),
      CQF_NUM("model.dropout", model.dropout, double),
      {"model.activation",
       [](RunConfig& c, const std::string& v) { c.model.activation = activation_from_string(v); }},
      {"model.n_clique",
       [](RunConfig& c, const std::string& v) {
         set_layout(c, parse_number<int>(v, "model.n_clique"), c.model.layout.clique_dim(),
                    c.model.layout.knot_dim());
       }},
      {"model.clique_dim",
       [](RunConfig& c, const std::string& v) {
         set_layout(c, c.model.layout.n_clique(), parse_number<int>(v, "model.clique_dim"),
                    c.model.layout.knot_dim());
       }},
      {"model.knot_dim",
       [](RunConfig& c, const std::string& v) {
         set_layout(c, c.model.layout.n_clique(), c.model.layout.clique_dim(),
                    parse_number<int>(v, "model.knot_dim"));
       }},
      CQF_NUM("train.tau", train.tau, double),
      CQF_NUM("train.lr", train.lr, double),
      CQF_NUM("train.warmup_steps", train.warmup_steps, Index),
      CQF_NUM("train.batch_size", train.batch_size, Index),
      CQF_NUM("train.steps", train.steps, Index),
      CQF_NUM("train.weight_decay", train.weight_decay, double),
      CQF_NUM("train.vib_scale", train.vib_scale, double),
      CQF_NUM("train.clip_norm", train.clip_norm, double),
      CQF_NUM("design.steps", design.steps, Index),
      CQF_NUM("design.lr", design.lr, double),
      CQF_NUM("design.weight_decay", design.weight_decay, double),
      {"design.decode",
       [](RunConfig& c, const std::string& v) {
         if (v == "argmax") {
           c.design.decode = DecodeMode::kArgmax;
         } else if (v == "sample") {
           c.design.decode = DecodeMode::kSample;
         } else {
           throw std::invalid_argument("design.decode must be argmax or sample");
         }
       }},
      {"design.decay",
       [](RunConfig& c, const std::string& v) {
         if (v == "adamw") {
           c.design.decay = DecayMode::kAdamW;
         } else if (v == "explicit") {
           c.design.decay = DecayMode::kExplicit;
         } else {
           throw std::invalid_argument("design.decay must be adamw or explicit");
         }
       }},
      CQF_NUM("baseline.hidden", baseline.train.hidden, Index),
      CQF_NUM("baseline.train_steps", baseline.train.steps, Index),
      CQF_NUM("baseline.batch_size", baseline.train.batch_size, Index),
      CQF_NUM("baseline.lr", baseline.train.lr, double),
      CQF_NUM("baseline.weight_decay", baseline.train.weight_decay, double),
      CQF_NUM("baseline.ascent_steps", baseline.ascent.steps, Index),
      CQF_NUM("baseline.ascent_lr", baseline.ascent.lr, double),
      CQF_NUM("rwr.beta", baseline.rwr.beta, double),
      CQF_NUM("rwr.iterations", baseline.rwr.iterations, Index),
      CQF_NUM("rwr.samples", baseline.rwr.samples, Index),
      CQF_NUM("coms.alpha", baseline.coms.alpha, double),
      CQF_NUM("coms.inner_steps", baseline.coms.inner_steps, Index),
      CQF_NUM("coms.inner_step_size", baseline.coms.inner_step_size, double),
      CQF_NUM("transformer.head_hidden", baseline.transformer.head_hidden, Index),
      CQF_NUM("transformer.dropout", baseline.transformer.dropout, double),
      {"run.seeds", [](RunConfig& c, const std::string& v) { c.seeds = parse_seeds(v); }},
      {"run.metric", [](RunConfig& c, const std::string& v) { c.metric = metric_from_string(v); }},
      CQF_NUM("run.top_k", metric.top_k, Index),
      CQF_NUM("run.candidates", metric.candidates, Index),
      {"run.out", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
  };
  return table;
}

#undef CQF_NUM

}  // namespace

void apply_overrides(RunConfig& config, const std::map<std::string, std::string>& values) {
  const auto& table = setters();
  for (const auto& [key, value] : values) {
    const auto it = table.find(key);
    if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    it->second(config, value);
  }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

CliqueformerConfig model_for(const RunConfig& config, const Dataset& data) {
  CliqueformerConfig m = config.model;
  m.modality = data.modality;
  m.design_dim = data.design_dim();
  m.vocab = data.vocab;
  return m;
}

std::uint64_t substream(std::uint64_t seed, std::uint64_t k) { return Rng(seed).split(k).seed(); }

json eval_to_json(const EvalResult& r) {
  return json{{"task", r.task},         {"method", r.method},     {"seed", r.seed},
              {"score", r.score},       {"topk_std", r.topk_std}, {"validity", r.validity},
              {"candidates", r.candidates}, {"top_k", r.top_k}, {"latent_growth", r.latent_growth}};
}

EvalResult eval_from_json(const json& j) {
  EvalResult r;
  r.task = j.at("task").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.score = j.at("score").get<double>();
  r.topk_std = j.at("topk_std").get<double>();
  r.validity = j.at("validity").get<double>();
  r.candidates = j.at("candidates").get<Index>();
  r.top_k = j.at("top_k").get<Index>();
  r.latent_growth = j.value("latent_growth", 0.0);
  return r;
}

template <typename F>
auto stage(const char* name, std::uint64_t seed, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage '") + name + "' (seed " + std::to_string(seed) +
                             "): " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

double latent_growth(const Matrix& start, const Matrix& end) {
  double worst = 0.0;
  for (Index r = 0; r < start.rows(); ++r) {
    const double a = start.row(r).cwiseAbs().maxCoeff();
    const double b = end.row(r).cwiseAbs().maxCoeff();
    if (a > 0.0) worst = std::max(worst, b / a);
  }
  return worst;
}

}  // namespace

std::pair<Cliqueformer, TrainReport> train_cliqueformer(const RunConfig& config,
                                                        const TaskInstance& task,
                                                        std::uint64_t seed) {
  TrainConfig tc = config.train;
  tc.seed = substream(seed, 1);
  return train(task.train, model_for(config, task.train), tc);
}

EvalResult run_seed(const RunConfig& config, const TaskInstance& task, std::uint64_t seed) {
  const bool keep = !config.out_dir.empty();
  const fs::path dir = keep ? config.out_dir / ("seed_" + std::to_string(seed)) : fs::path{};
  if (keep) fs::create_directories(dir);
  const auto have = [&](const char* file) { return keep && config.resume && fs::exists(dir / file); };

  if (have("eval.json")) return eval_from_json(read_json(dir / "eval.json"));

  Matrix designs;
  double growth = 0.0;
  if (have("designs.csv")) {
    designs = stage("design", seed, [&] { return read_designs_csv(dir / "designs.csv"); });
  } else if (config.method == Method::kCliqueformer) {
    Cliqueformer model = stage("train", seed, [&] {
      if (have("model.ckpt")) return load_cliqueformer(dir / "model.ckpt");
      auto [m, report] = train_cliqueformer(config, task, seed);
      if (keep) {
        save_cliqueformer(dir / "model.ckpt", m);
        write_curves_csv(report, dir / "curves.csv");
      }
      return std::move(m);
    });
    DesignBatch batch = stage("design", seed, [&] {
      DesignOptConfig dc = config.design;
      dc.batch_size = config.metric.candidates;
      dc.seed = substream(seed, 2);
      return optimize_designs(model, task.train, dc);
    });
    growth = latent_growth(batch.initial_latents, batch.latents);
    designs = std::move(batch.designs);
    if (keep) {
      write_designs_csv(designs, dir / "designs.csv");
      write_text(dir / "trace.json", json{{"surrogate", batch.surrogate_trace},
                                          {"latent_growth", growth}}.dump());
    }
  } else {
    BaselineRun run = stage("train+design", seed, [&] {
      BaselineConfig bc = config.baseline;
      bc.train.seed = substream(seed, 3);
      bc.ascent.seed = substream(seed, 4);
      bc.ascent.batch_size = config.metric.candidates;
      switch (config.method) {
        case Method::kGradAscent: return grad_ascent_baseline(task.train, bc);
        case Method::kRwr: return rwr_baseline(task.train, bc);
        case Method::kComs: return coms_baseline(task.train, bc);
        case Method::kTransformer:
          if (bc.transformer.head_hidden < 1) {
            const double dropout = bc.transformer.dropout;
            bc.transformer = matched_transformer_config(model_for(config, task.train));
            bc.transformer.dropout = dropout;
          }
          return transformer_baseline(task.train, bc);
        case Method::kCliqueformer: break;
      }
      throw std::logic_error("unreachable method");
    });
    designs = std::move(run.designs);
    if (keep) write_designs_csv(designs, dir / "designs.csv");
  }

  EvalResult r = stage("evaluate", seed, [&] {
    return evaluate_candidates(task.oracle, designs, config.metric.top_k);
  });
  r.task = task.name;
  r.method = std::string(to_string(config.method));
  r.seed = seed;
  r.latent_growth = growth;
  if (keep) write_text(dir / "eval.json", eval_to_json(r).dump(2));
  return r;
}

AggregateResult run_benchmark(const RunConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("run_benchmark: no seeds");
  const TaskInstance task = stage("generate", config.task.task_seed, [&] { return build_task(config.task); });
  std::vector<EvalResult> rows;
  for (std::uint64_t s : config.seeds) rows.push_back(run_seed(config, task, s));
  AggregateResult agg = aggregate(rows);
  if (!config.out_dir.empty()) write_results(agg, config.out_dir);
  return agg;
}

void write_results(const AggregateResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream csv(dir / "results.csv");
  if (!csv) throw std::runtime_error("cannot write results in " + dir.string());
  csv << "task,method,seed,score,topk_std,validity,candidates,top_k\n";
  csv.precision(10);
  for (const auto& r : result.per_seed) {
    csv << r.task << ',' << r.method << ',' << r.seed << ',' << r.score << ',' << r.topk_std << ','
        << r.validity << ',' << r.candidates << ',' << r.top_k << '\n';
  }
  json j{{"task", result.task},
         {"method", result.method},
         {"seeds", result.per_seed.size()},
         {"mean_score", result.mean_score},
         {"seed_std", result.seed_std},
         {"mean_topk_std", result.mean_topk_std},
         {"mean_validity", result.mean_validity},
         {"per_seed", json::array()}};
  for (const auto& r : result.per_seed) j["per_seed"].push_back(eval_to_json(r));
  write_text(dir / "aggregate.json", j.dump(2));
}

// ---------------------------------------------------------------------------
// Rotation demonstration

Matrix sum_aligned_rotation(int l) {
  if (l < 2) throw std::invalid_argument("sum_aligned_rotation: l must be >= 2");
  const Index n = l;
  Matrix r(n, n);
  r.row(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  Index filled = 1;
  for (Index e = 0; e < n && filled < n; ++e) {
    RowVector v = RowVector::Zero(n);
    v(e) = 1.0;
    // Two Gram-Schmidt passes keep the basis orthonormal to rounding.
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < filled; ++k) v -= v.dot(r.row(k)) * r.row(k);
    }
    const double norm = v.norm();
    if (norm < 1e-8) continue;
    r.row(filled++) = v / norm;
  }
  return r;
}

RotationReport rotation_demo(int l, Index n_probes, std::uint64_t seed, double h) {
  if (l < 2) throw std::invalid_argument("rotation_demo: l must be >= 2");
  if (n_probes < 1) throw std::invalid_argument("rotation_demo: need at least one probe");
  const Matrix rot = sum_aligned_rotation(l);
  const double c = 1.0 / std::sqrt(static_cast<double>(l));
  const auto fz = [c](const Vector& z) { return std::exp(c * z.sum()); };
  const Matrix rt = rot.transpose();
  const auto fv = [&](const Vector& v) { return fz(rt * v); };

  const auto mixed = [h](const auto& f, const Vector& p, Index i, Index j) {
    Vector q = p;
    q(i) += h;
    q(j) += h;
    const double pp = f(q);
    q(j) -= 2 * h;
    const double pm = f(q);
    q(i) -= 2 * h;
    const double mm = f(q);
    q(j) += 2 * h;
    const double mp = f(q);
    return (pp - pm - mp + mm) / (4 * h * h);
  };

  RotationReport rep;
  rep.dim = l;
  rep.min_offdiag_z = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (Index p = 0; p < n_probes; ++p) {
    Vector point(l);
    for (Index k = 0; k < l; ++k) point(k) = rng.normal();
    for (Index i = 0; i < l; ++i) {
      for (Index j = i + 1; j < l; ++j) {
        rep.max_offdiag_v = std::max(rep.max_offdiag_v, std::abs(mixed(fv, point, i, j)));
        rep.min_offdiag_z = std::min(rep.min_offdiag_z, std::abs(mixed(fz, point, i, j)));
      }
    }
    for (Index k = 1; k < l; ++k) {
      Vector a = point, b = point;
      a(k) += h;
      b(k) -= h;
      rep.max_grad_tail_v = std::max(rep.max_grad_tail_v, std::abs((fv(a) - fv(b)) / (2 * h)));
    }
  }
  rep.dependence_gap = rep.min_offdiag_z / std::max(rep.max_offdiag_v, 1e-12);
  return rep;
}

// ---------------------------------------------------------------------------
// Decomposed vs. monolithic surrogate

CliqueSurrogate::CliqueSurrogate(const CliqueLayout& layout, Index hidden, std::uint64_t seed,
                                 Index embed_d_model)
    : layout_(layout) {
  const Index embed = layout.clique_dim() + layout.clique_dim() % 2;
  embedding_ = clique_embedding_table(layout, embed, embed_d_model);
  Rng rng(seed);
  net_ = Mlp::create(params_, "clique_mlp", {layout.clique_dim() + embed, hidden, hidden, 1},
                     Activation::kGelu, rng);
}

Var CliqueSurrogate::forward(Tape& tape, const Var& x, const ForwardContext& ctx) {
  if (x.cols() != layout_.latent_dim()) throw ShapeError("CliqueSurrogate: width mismatch");
  const Index batch = x.rows();
  Var inputs = concat_cols(gather_cliques(x, layout_), tile_rows(tape.constant(embedding_), batch));
  return row_mean(reshape(net_(tape, params_, inputs, ctx), batch, layout_.n_clique()));
}

Index matched_mlp_hidden(Index input_width, std::size_t target) {
  // Parameters of [in, h, h, 1]: h^2 + (in + 3) h + 1.
  const auto count = [input_width](Index h) { return h * h + (input_width + 3) * h + 1; };
  Index best = 1;
  for (Index h = 1; count(h) <= 4 * static_cast<Index>(target) + 16; ++h) {
    const auto diff = [&](Index k) { return std::abs(static_cast<double>(count(k)) - static_cast<double>(target)); };
    if (diff(h) < diff(best)) best = h;
  }
  return best;
}

FgmStudyReport fgm_vs_oblivious(const FgmStudyConfig& config, std::uint64_t seed) {
  const Index n = config.n_train + config.n_test;
  auto [task, full] = generate_latent_rbf(config.n_triangles, 0, n, seed);
  const Index dz = task.latent_dim();

  Dataset train;
  train.modality = Modality::kContinuous;
  train.designs = full.designs.topLeftCorner(config.n_train, dz);
  train.scores = full.scores.head(config.n_train);
  train.stats = compute_stats(train.scores);
  const Matrix test_z = full.designs.bottomLeftCorner(config.n_test, dz);
  Vector test_y(config.n_test);
  for (Index i = 0; i < config.n_test; ++i) {
    test_y(i) = normalize_score(train.stats, full.scores(config.n_train + i));
  }

  CliqueSurrogate fgm(task.layout, config.hidden, substream(seed, 5));
  FgmStudyReport rep;
  rep.params_fgm = fgm.params().num_scalars();
  SurrogateMlp obl(dz, matched_mlp_hidden(dz, rep.params_fgm), substream(seed, 5));
  rep.params_obl = obl.params().num_scalars();
  const double mismatch = std::abs(static_cast<double>(rep.params_obl) -
                                   static_cast<double>(rep.params_fgm)) /
                          static_cast<double>(rep.params_fgm);
  if (mismatch > 0.05) {
    throw std::runtime_error("fgm_vs_oblivious: parameter counts differ by " +
                             std::to_string(100 * mismatch) + "%");
  }

  SurrogateTrainConfig tc = config.train;
  tc.seed = substream(seed, 6);
  train_surrogate(fgm, train, tc);
  train_surrogate(obl, train, tc);
  rep.test_mse_fgm = (fgm.predict(test_z) - test_y).squaredNorm() / static_cast<double>(config.n_test);
  rep.test_mse_obl = (obl.predict(test_z) - test_y).squaredNorm() / static_cast<double>(config.n_test);

  AscentConfig ac = config.ascent;
  ac.seed = substream(seed, 7);
  const auto value = [&](const Matrix& z) {
    double s = 0.0;
    for (Index r = 0; r < z.rows(); ++r) {
      const Vector row = z.row(r).transpose();
      s += normalize_score(train.stats, latent_value(task, {row.data(), static_cast<std::size_t>(dz)}));
    }
    return s / static_cast<double>(z.rows());
  };
  AscentConfig start = ac;
  start.steps = 0;
  rep.start_value = value(ascend_designs(fgm, train, start));
  rep.design_value_fgm = value(ascend_designs(fgm, train, ac));
  rep.design_value_obl = value(ascend_designs(obl, train, ac));
  return rep;
}

// ---------------------------------------------------------------------------
// Ablations

CliqueLayout fixed_latent_layout(const CliqueLayout& base, int n_clique) {
  const Index dz = base.latent_dim();
  if (n_clique < 1) throw std::invalid_argument("fixed_latent_layout: n_clique must be >= 1");
  if (n_clique == 1) return make_chain(1, static_cast<int>(dz), 0);
  const int knot = base.knot_dim();
  // d_z = knot + N (d_clique - knot)
  if ((dz - knot) % n_clique != 0) {
    throw std::invalid_argument("fixed_latent_layout: d_z = " + std::to_string(dz) +
                                " cannot be split into " + std::to_string(n_clique) +
                                " cliques with knot " + std::to_string(knot));
  }
  return make_chain(n_clique, knot + static_cast<int>((dz - knot) / n_clique), knot);
}

RunConfig ablation_variant(const RunConfig& base, std::string_view variant,
                           CliqueLayout* layout_out) {
  RunConfig c = base;
  const auto colon = variant.find(':');
  const std::string_view head = variant.substr(0, colon);
  if (variant == "base") {
  } else if (variant == "no_vib") {
    c.train.vib_scale = 0.0;
  } else if (variant == "no_weight_decay") {
    c.design.weight_decay = 0.0;
  } else if (colon != std::string_view::npos &&
             (head == "cliques_fixed_dz" || head == "cliques_fixed_dclique")) {
    const int n = parse_number<int>(variant.substr(colon + 1), "ablation clique count");
    c.model.layout = head == "cliques_fixed_dz"
                         ? fixed_latent_layout(base.model.layout, n)
                         : make_chain(n, base.model.layout.clique_dim(), base.model.layout.knot_dim());
  } else {
    throw std::invalid_argument("unknown ablation variant '" + std::string(variant) + "'");
  }
  if (!base.out_dir.empty()) {
    std::string leaf(variant);
    std::replace(leaf.begin(), leaf.end(), ':', '_');
    c.out_dir = base.out_dir / leaf;
  }
  if (layout_out != nullptr) *layout_out = c.model.layout;
  return c;
}

std::vector<AblationRow> ablation_suite(const RunConfig& base,
                                        const std::vector<std::string>& variants) {
  std::vector<RunConfig> configs;
  std::vector<CliqueLayout> layouts;
  for (const auto& v : variants) {  // validate everything before running anything
    CliqueLayout layout = base.model.layout;
    configs.push_back(ablation_variant(base, v, &layout));
    layouts.push_back(layout);
  }
  const TaskInstance task = build_task(base.task);
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const RunConfig& c = configs[i];
    // no_weight_decay only changes the design phase: reuse base checkpoints.
    if (variants[i] == "no_weight_decay" && !c.out_dir.empty()) {
      const RunConfig b = ablation_variant(base, "base");
      for (std::uint64_t s : c.seeds) {
        const fs::path from = b.out_dir / ("seed_" + std::to_string(s)) / "model.ckpt";
        const fs::path to_dir = c.out_dir / ("seed_" + std::to_string(s));
        if (fs::exists(from) && !fs::exists(to_dir / "model.ckpt")) {
          fs::create_directories(to_dir);
          fs::copy_file(from, to_dir / "model.ckpt");
        }
      }
    }
    std::vector<EvalResult> seed_rows;
    for (std::uint64_t s : c.seeds) seed_rows.push_back(run_seed(c, task, s));
    AblationRow row{variants[i], layouts[i], aggregate(seed_rows)};
    if (!c.out_dir.empty()) write_results(row.result, c.out_dir);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_table(const std::vector<AblationRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "variant,n_clique,clique_dim,knot_dim,latent_dim,mean_score,seed_std,mean_validity\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.variant << ',' << r.layout.n_clique() << ',' << r.layout.clique_dim() << ','
        << r.layout.knot_dim() << ',' << r.layout.latent_dim() << ',' << r.result.mean_score << ','
        << r.result.seed_std << ',' << r.result.mean_validity << '\n';
  }
}

}  // namespace cliqueformer
