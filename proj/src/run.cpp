#include "gel/run.hpp"

#include "gel/io.hpp"
#include "gel/two_sample.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <set>
#include <sstream>

namespace gel {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& why) { throw GelError(ErrorCode::InvalidArgument, why); }

struct Inputs {
  FeatureSet data;
  std::optional<FeatureSet> model;
  std::optional<FeatureSet> pool;
  std::vector<std::string> warnings;
};

Inputs load_inputs(const RunConfig& cfg, bool needs_pool) {
  Inputs in;
  in.data = load_features(cfg.data_path, std::nullopt, cfg.labels_data);
  if (cfg.model_path) in.model = load_features(*cfg.model_path, std::nullopt, cfg.labels_model);
  if (needs_pool) {
    if (cfg.witness_pool_path) {
      in.pool = load_features(*cfg.witness_pool_path, std::nullopt, cfg.labels_witness);
    } else {
      in.pool = in.data;
    }
  }
  if (cfg.pca) {
    std::vector<FeatureSet> sets{in.data};
    if (in.model) sets.push_back(*in.model);
    if (in.pool) sets.push_back(*in.pool);
    PcaResult fitted = pca_preprocess(sets);
    std::size_t k = 0;
    in.data = fitted.sets[k++];
    if (in.model) in.model = fitted.sets[k++];
    if (in.pool) in.pool = fitted.sets[k++];
    in.warnings = fitted.warnings;
  }
  return in;
}

KernelSpec make_kernel(const RunConfig& cfg, Index dim) {
  const ExponentialKernel image{dim};
  if (cfg.kernel == "exponential") return image;
  if (cfg.kernel == "product-delta") return ProductKernel{image, DeltaLabelKernel{}};
  if (cfg.kernel == "product-hierarchy") {
    if (!cfg.hierarchy_path) invalid("product-hierarchy kernel needs --hierarchy");
    auto h = std::make_shared<const LabelHierarchy>(load_hierarchy(*cfg.hierarchy_path));
    return ProductKernel{image, HierarchyPathKernel{h}};
  }
  invalid("unknown kernel: " + cfg.kernel);
}

std::vector<SampleWeight> to_sample_weights(const Vector& w, const std::vector<SampleId>& ids) {
  std::vector<SampleWeight> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], w(static_cast<Index>(i))});
  return out;
}

// Outcome of the test a command runs; exactly one of the solutions is set.
struct Outcome {
  std::optional<GelSolution> one;
  std::optional<TwoSampleSolution> two;

  const Vector& data_weights() const { return one ? one->weights : two->pi; }
  bool converged() const { return one ? one->converged() : two->converged(); }
};

void fill_report(Report& r, const Outcome& o, const FeatureSet& data,
                 const std::optional<FeatureSet>& model, bool include_weights) {
  if (o.one) {
    const GelSolution& s = *o.one;
    r.two_sample = false;
    r.status = status_name(s.status);
    r.divergence = divergence_name(s.kind);
    r.divergence_nats = s.divergence_nats;
    r.divergence_bits = s.divergence_bits;
    r.score = format_score(s.score);
    r.wilks = s.wilks;
    if (s.hull) r.hull = hull_kind_name(*s.hull);
    r.iterations = s.iterations;
    r.final_grad_norm = s.final_grad_norm;
    r.hessian_rank = s.hessian_rank;
    r.hotelling_t2 = s.hotelling_t2;
    r.warnings.insert(r.warnings.end(), s.warnings.begin(), s.warnings.end());
    if (s.weights.allFinite()) {
      r.beta = count_zero_weights(s.weights);
      if (include_weights) r.data_weights = to_sample_weights(s.weights, data.ids);
    }
    return;
  }
  const TwoSampleSolution& s = *o.two;
  r.two_sample = true;
  r.status = status_name(s.status);
  r.divergence = divergence_name(s.kind);
  r.divergence_nats = s.divergence_data_nats;
  r.divergence_bits = s.divergence_data_bits;
  r.model_divergence_nats = s.divergence_model_nats;
  r.model_divergence_bits = s.divergence_model_bits;
  r.score = s.score_string();
  r.wilks = wilks_statistic(s.pi);
  if (s.hull) r.hull = hull_kind_name(*s.hull);
  r.iterations = s.iterations;
  r.final_grad_norm = s.final_grad_norm;
  r.warnings.insert(r.warnings.end(), s.warnings.begin(), s.warnings.end());
  if (s.pi.allFinite() && s.psi.allFinite()) {
    r.beta = count_zero_weights(s.pi);
    r.alpha = count_zero_weights(s.psi);
    if (include_weights) {
      r.data_weights = to_sample_weights(s.pi, data.ids);
      r.model_weights = to_sample_weights(s.psi, model->ids);
    }
  }
}

const FeatureSet& need_model(const Inputs& in, const char* command) {
  if (!in.model) invalid(std::string(command) + " needs --model");
  return *in.model;
}

Outcome run_mean_test(const RunConfig& cfg, const Inputs& in) {
  Outcome o;
  if (cfg.two_sample) {
    const FeatureSet& model = need_model(in, "two-sample mean-test");
    Matrix x = in.data.features, y = model.features;
    if (cfg.condition == Condition::Fid) {
      x = fid_augment(x);
      y = fid_augment(y);
    }
    o.two = solve_two_sample(stack_two_sample(x, y), cfg.divergence, cfg.solver);
    return o;
  }
  MomentMatrix moments;
  switch (cfg.condition) {
    case Condition::Mean: {
      const FeatureSet& model = need_model(in, "mean-test");
      moments = build_mean_moments(in.data, model.features.colwise().mean().transpose());
      break;
    }
    case Condition::Fid:
      moments = build_fid_moments(in.data, need_model(in, "mean-test --condition fid"));
      break;
    case Condition::User:
      moments = wrap_user_moments(in.data.features);
      break;
  }
  o.one = solve(cfg.divergence, moments, cfg.solver);
  return o;
}

Outcome run_kernel_test(const RunConfig& cfg, const FeatureSet& data, const FeatureSet& model,
                        const WitnessSet& witnesses, const KernelSpec& kernel, bool two_sample) {
  Outcome o;
  if (two_sample) {
    o.two = kgel2(data, model, witnesses, kernel, cfg.divergence, cfg.solver);
  } else {
    const auto mode = cfg.paired ? EmbeddingMode::Paired : EmbeddingMode::VsModelMean;
    o.one = solve(cfg.divergence, build_me_moments(data, model, witnesses, kernel, mode), cfg.solver);
  }
  return o;
}

bool is_two_sample(const RunConfig& cfg) {
  return cfg.command == Command::Kgel2 || cfg.two_sample;
}

// Per-class sharding: one kernel test per data label, run concurrently.
json run_per_class(const RunConfig& cfg, const Inputs& in, const KernelSpec& kernel) {
  const FeatureSet& model = need_model(in, "mode-report");
  if (!in.data.labels || !model.labels) invalid("--per-class needs --labels-data and --labels-model");
  std::set<Label> classes(in.data.labels->begin(), in.data.labels->end());

  auto rows_with = [](const FeatureSet& s, const Label& c) {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < s.labels->size(); ++i) {
      if ((*s.labels)[i] == c) rows.push_back(static_cast<Index>(i));
    }
    return rows;
  };

  std::vector<std::pair<Label, std::future<json>>> jobs;
  for (const Label& c : classes) {
    jobs.emplace_back(c, std::async(std::launch::async, [&, c]() -> json {
                        const FeatureSet d = in.data.subset(rows_with(in.data, c));
                        const auto model_rows = rows_with(model, c);
                        if (model_rows.empty()) {
                          return json{{"status", "skipped"}, {"reason", "no model samples"}};
                        }
                        const FeatureSet m = model.subset(model_rows);
                        FeatureSet pool = *in.pool;
                        if (pool.labels) {
                          const auto pool_rows = rows_with(pool, c);
                          if (!pool_rows.empty()) pool = pool.subset(pool_rows);
                        }
                        const WitnessSet w = sample_witnesses(
                            pool, std::min<Index>(cfg.witness_count, pool.size()), cfg.seed);
                        try {
                          const Outcome o = run_kernel_test(cfg, d, m, w, kernel, is_two_sample(cfg));
                          Report r;
                          r.command = "mode-report/class";
                          r.seed = cfg.seed;
                          fill_report(r, o, d, m, cfg.include_weights);
                          json j = report_to_json(r);
                          j.erase("config");
                          j.erase("timing_seconds");
                          j["n_data"] = d.size();
                          j["n_model"] = m.size();
                          return j;
                        } catch (const GelError& e) {
                          return json{{"status", "error"}, {"reason", e.what()}};
                        }
                      }));
  }
  json out = json::object();
  for (auto& [label, fut] : jobs) out[label] = fut.get();
  return out;
}

Report run_bench(const RunConfig& cfg) {
  const Index k = std::min(cfg.bench_modes, cfg.bench_dim);
  auto counts = [&](Index total) {
    std::vector<Index> c(static_cast<std::size_t>(k), total / k);
    for (Index i = 0; i < total % k; ++i) ++c[static_cast<std::size_t>(i)];
    return c;
  };
  const FeatureSet data = gen_gaussian_mixture(k, 3.0, counts(cfg.bench_n), cfg.bench_dim, cfg.seed);
  const FeatureSet model = gen_gaussian_mixture(k, 3.0, counts(cfg.bench_n), cfg.bench_dim, cfg.seed + 1);
  const FeatureSet pool = gen_gaussian_mixture(k, 3.0, counts(std::max(cfg.witness_count, k)),
                                               cfg.bench_dim, cfg.seed + 2);
  PcaResult fitted = pca_preprocess({data, model, pool});
  const KernelSpec kernel = ExponentialKernel{fitted.transform.output_dim()};
  const WitnessSet w = sample_witnesses(fitted.sets[2], cfg.witness_count, cfg.seed);

  Report r;
  const Outcome o = run_kernel_test(cfg, fitted.sets[0], fitted.sets[1], w, kernel, cfg.two_sample);
  fill_report(r, o, fitted.sets[0], fitted.sets[1], cfg.include_weights);
  return r;
}

std::vector<bool> read_flags(const std::string& path, Index n) {
  std::vector<bool> flags;
  for (const auto& token : read_labels(path)) {
    if (token == "1" || token == "true") {
      flags.push_back(true);
    } else if (token == "0" || token == "false") {
      flags.push_back(false);
    } else {
      throw GelError(ErrorCode::Parse, "corruption flags must be 0/1, got " + token);
    }
  }
  if (static_cast<Index>(flags.size()) != n) {
    throw GelError(ErrorCode::DimensionMismatch, "corruption flag count does not match the data");
  }
  return flags;
}

}  // namespace

std::string command_name(Command command) {
  switch (command) {
    case Command::MeanTest: return "mean-test";
    case Command::Kgel: return "kgel";
    case Command::Kgel2: return "kgel2";
    case Command::HullCheck: return "hull-check";
    case Command::ModeReport: return "mode-report";
    case Command::LabelTest: return "label-test";
    case Command::Rank: return "rank";
    case Command::Bench: return "bench";
  }
  return "unknown";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::MeanTest, Command::Kgel, Command::Kgel2, Command::HullCheck,
                    Command::ModeReport, Command::LabelTest, Command::Rank, Command::Bench}) {
    if (command_name(c) == name) return c;
  }
  invalid("unknown command: " + name);
}

void RunConfig::validate() const {
  solver.validate();
  if (command != Command::Bench && data_path.empty()) invalid("--data is required");
  if (kernel != "exponential" && kernel != "product-delta" && kernel != "product-hierarchy") {
    invalid("unknown kernel: " + kernel);
  }
  const bool labeled_kernel = kernel != "exponential";
  const bool kernel_command = command == Command::Kgel || command == Command::Kgel2 ||
                              command == Command::ModeReport || command == Command::LabelTest ||
                              command == Command::Rank;
  if (kernel_command && !model_path) invalid(command_name(command) + " needs --model");
  if (kernel_command && witness_count < 1) invalid("--witness-count must be positive");
  if (labeled_kernel && kernel_command) {
    if (!labels_data || !labels_model) {
      invalid("labeled kernels need --labels-data and --labels-model");
    }
    if (witness_pool_path && !labels_witness) {
      invalid("labeled kernels with --witness-pool need --labels-witness");
    }
  }
  if (kernel == "product-hierarchy" && !hierarchy_path) invalid("product-hierarchy needs --hierarchy");
  if (command == Command::LabelTest && !labeled_kernel) {
    invalid("label-test needs a product kernel (--kernel product-delta or product-hierarchy)");
  }
  if (command == Command::ModeReport && !labels_data) invalid("mode-report needs --labels-data");
  if (per_class && command != Command::ModeReport) invalid("--per-class applies to mode-report");
  if (paired && (two_sample || command == Command::Kgel2)) {
    invalid("--paired applies to one-sample kgel only");
  }
  if (command == Command::Bench && (bench_n < 2 || bench_dim < 1 || bench_modes < 1)) {
    invalid("bench sizes must be positive");
  }
}

json config_to_json(const RunConfig& c) {
  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  const auto& s = c.solver;
  json j{
      {"command", command_name(c.command)},
      {"condition", c.condition == Condition::Mean ? "mean" : c.condition == Condition::Fid ? "fid" : "user"},
      {"divergence", divergence_name(c.divergence)},
      {"two_sample", c.two_sample},
      {"paired", c.paired},
      {"data", c.data_path},
      {"model", opt(c.model_path)},
      {"witness_pool", opt(c.witness_pool_path)},
      {"labels_data", opt(c.labels_data)},
      {"labels_model", opt(c.labels_model)},
      {"labels_witness", opt(c.labels_witness)},
      {"hierarchy", opt(c.hierarchy_path)},
      {"corrupted", opt(c.corrupted_path)},
      {"kernel", c.kernel},
      {"witness_count", c.witness_count},
      {"seed", c.seed},
      {"pca", c.pca},
      {"out", opt(c.out_path)},
      {"include_weights", c.include_weights},
      {"present_count", c.present_count ? json(*c.present_count) : json(nullptr)},
      {"dropped", c.dropped},
      {"per_class", c.per_class},
      {"bottom", c.bottom},
      {"bench_n", c.bench_n},
      {"bench_dim", c.bench_dim},
      {"bench_modes", c.bench_modes},
      {"solver",
       {{"grad_tolerance", s.grad_tolerance},
        {"param_cap", s.param_cap},
        {"grad_cap", s.grad_cap},
        {"max_iterations", s.max_iterations},
        {"el_step", s.el_step},
        {"et_step", s.et_step},
        {"hull_epsilon", s.hull_epsilon},
        {"hull_max_iterations", s.hull_max_iterations},
        {"rng_seed", s.rng_seed},
        {"skip_hull_check", s.skip_hull_check}}},
  };
  return j;
}

Report run(const RunConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();

  Report r;
  r.command = command_name(cfg.command);
  r.config = config_to_json(cfg);
  r.seed = cfg.seed;

  if (cfg.command == Command::Bench) {
    Report b = run_bench(cfg);
    b.command = r.command;
    b.config = r.config;
    b.seed = r.seed;
    r = std::move(b);
  } else if (cfg.command == Command::HullCheck) {
    const Inputs in = load_inputs(cfg, false);
    r.warnings = in.warnings;
    const Vector target = in.model ? Vector(in.model->features.colwise().mean().transpose())
                                   : Vector::Zero(in.data.dim());
    if (target.size() != in.data.dim()) {
      throw GelError(ErrorCode::DimensionMismatch, "model and data dimensions differ");
    }
    HullOptions opts;
    opts.epsilon = cfg.solver.hull_epsilon;
    opts.seed = cfg.solver.rng_seed;
    opts.max_iterations = cfg.solver.hull_max_iterations;
    const HullVerdict v = hull_membership(in.data.features, target, opts);
    r.status = hull_kind_name(v.kind);
    r.hull = r.status;
    r.hull_distance = v.distance_bound;
    r.iterations = v.iterations;
    r.score = v.kind == HullKind::Inside ? "finite" : "+inf";
    if (cfg.include_weights && v.kind == HullKind::Inside) {
      r.data_weights = to_sample_weights(v.coefficients, in.data.ids);
    }
  } else if (cfg.command == Command::MeanTest) {
    const Inputs in = load_inputs(cfg, false);
    r.warnings = in.warnings;
    fill_report(r, run_mean_test(cfg, in), in.data, in.model, cfg.include_weights);
  } else {
    const Inputs in = load_inputs(cfg, true);
    r.warnings = in.warnings;
    const FeatureSet& model = need_model(in, r.command.c_str());
    const KernelSpec kernel = make_kernel(cfg, in.data.dim());

    if (cfg.command == Command::ModeReport && cfg.per_class) {
      r.per_class = run_per_class(cfg, in, kernel);
      r.status = "per-class";
      r.divergence = divergence_name(cfg.divergence);
      r.two_sample = is_two_sample(cfg);
      r.score = "per-class";
    } else {
      const WitnessSet witnesses = sample_witnesses(*in.pool, cfg.witness_count, cfg.seed);
      const Outcome o = run_kernel_test(cfg, in.data, model, witnesses, kernel, is_two_sample(cfg));
      fill_report(r, o, in.data, in.model, cfg.include_weights);

      const Vector& w = o.data_weights();
      if (cfg.command == Command::ModeReport && w.allFinite()) {
        ClassReport cr = aggregate_class_weights(w, *in.data.labels, cfg.present_count);
        if (!cfg.dropped.empty()) {
          ModeSpec spec;
          for (const auto& kv : cr.class_mass) spec.classes.push_back(kv.first);
          spec.dropped = cfg.dropped;
          attach_oracle(cr, oracle_mode_distribution(spec));
        }
        r.class_report = cr;
      }
      if (cfg.command == Command::LabelTest && cfg.corrupted_path && w.allFinite()) {
        r.pr_curve = pr_curve_from_weights(w, read_flags(*cfg.corrupted_path, in.data.size()));
      }
      if (cfg.command == Command::Rank && w.allFinite()) {
        const auto ranked = rank_samples(w, in.data.ids);
        r.ranking = bottom_k(ranked, std::min<Index>(cfg.bottom, static_cast<Index>(ranked.size())));
      }
    }
  }

  r.timing_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

std::string summary_line(const Report& r) {
  std::ostringstream ss;
  ss << r.command << " " << r.divergence << " status=" << r.status << " score=" << r.score;
  if (r.two_sample) {
    ss << " alpha=" << r.alpha.value_or(0) << " beta=" << r.beta;
  } else if (!r.divergence.empty()) {
    ss << " zeros=" << r.beta;
  }
  if (r.class_report && r.class_report->hellinger_to_oracle) {
    ss << " hellinger=" << *r.class_report->hellinger_to_oracle;
  }
  if (r.pr_curve) ss << " pr_auc=" << r.pr_curve->auc;
  ss << " time=" << r.timing_seconds << "s";
  return ss.str();
}

}  // namespace gel
