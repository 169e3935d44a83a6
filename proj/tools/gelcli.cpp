// gelcli: generalized empirical likelihood tests on precomputed features.
//
// Exit codes: 0 for any completed test (including hull failures, which are a
// valid infinite-divergence result), 1 for numerical failures, 2 for
// configuration and IO errors.

#include "gel/io.hpp"
#include "gel/run.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Options {
  gel::RunConfig cfg;
  std::string divergence = "et";
  std::string condition = "mean";
  std::string model, pool, labels_data, labels_model, labels_witness, hierarchy, corrupted, out;
  std::string dropped;
  long long present_count = 0;
  bool no_weights = false;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.cfg.data_path, "data (test) features, .npy or .csv");
  sub->add_option("--model", o.model, "model features, .npy or .csv");
  sub->add_option("--witness-pool", o.pool, "witness pool features (defaults to --data)");
  sub->add_option("--witness-count", o.cfg.witness_count, "number of witness points")
      ->capture_default_str();
  sub->add_option("--seed", o.cfg.seed, "seed for witness sampling and hull pivots")
      ->capture_default_str();
  sub->add_option("--kernel", o.cfg.kernel, "exponential | product-delta | product-hierarchy")
      ->capture_default_str();
  sub->add_option("--divergence", o.divergence, "el | et | euclidean")->capture_default_str();
  sub->add_flag("--two-sample", o.cfg.two_sample, "two-sample (GEL2/KGEL2) test");
  sub->add_option("--labels-data", o.labels_data, "labels for --data, one per line");
  sub->add_option("--labels-model", o.labels_model, "labels for --model, one per line");
  sub->add_option("--labels-witness", o.labels_witness, "labels for --witness-pool");
  sub->add_option("--hierarchy", o.hierarchy, "label hierarchy JSON");
  sub->add_flag("--pca", o.cfg.pca, "full-rank PCA of all feature sets before testing");
  sub->add_option("--out", o.out, "report path (JSON)");
  sub->add_flag("--no-weights", o.no_weights, "omit per-sample weights from the report");
  sub->add_option("--tol", o.cfg.solver.grad_tolerance, "gradient-norm tolerance")
      ->capture_default_str();
  sub->add_option("--max-iters", o.cfg.solver.max_iterations, "Newton iteration cap")
      ->capture_default_str();
  sub->add_option("--hull-epsilon", o.cfg.solver.hull_epsilon, "triangle algorithm epsilon")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized empirical likelihood tests for generative-model evaluation"};
  app.require_subcommand(1);
  Options o;

  struct Sub {
    const char* name;
    const char* help;
    gel::Command command;
  };
  const Sub subs[] = {
      {"mean-test", "mean / FID / user-moment GEL test", gel::Command::MeanTest},
      {"kgel", "kernel mean-embedding GEL test", gel::Command::Kgel},
      {"kgel2", "two-sample kernel GEL test", gel::Command::Kgel2},
      {"hull-check", "is the model mean inside the convex hull of the data", gel::Command::HullCheck},
      {"mode-report", "per-class weight mass and Hellinger recovery", gel::Command::ModeReport},
      {"label-test", "labeled kernel test for improper label conditioning", gel::Command::LabelTest},
      {"rank", "rank data samples by weight", gel::Command::Rank},
      {"bench", "time a synthetic KGEL run", gel::Command::Bench},
  };
  std::vector<std::pair<CLI::App*, gel::Command>> registered;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, o);
    registered.emplace_back(sub, s.command);
    switch (s.command) {
      case gel::Command::MeanTest:
        sub->add_option("--condition", o.condition, "mean | fid | user")->capture_default_str();
        break;
      case gel::Command::Kgel:
        sub->add_flag("--paired", o.cfg.paired, "paired mean-embedding moments");
        break;
      case gel::Command::ModeReport:
        sub->add_option("--present-count", o.present_count, "rescale divisor for display weights");
        sub->add_option("--dropped", o.dropped, "comma-separated classes absent from the model");
        sub->add_flag("--per-class", o.cfg.per_class, "one test per data label, run concurrently");
        break;
      case gel::Command::LabelTest:
        sub->add_option("--corrupted", o.corrupted, "0/1 per data sample; emits a PR curve");
        break;
      case gel::Command::Rank:
        sub->add_option("--bottom", o.cfg.bottom, "number of lowest-weight samples")
            ->capture_default_str();
        break;
      case gel::Command::Bench:
        sub->add_option("--n", o.cfg.bench_n, "samples per side")->capture_default_str();
        sub->add_option("--dim", o.cfg.bench_dim, "feature dimension")->capture_default_str();
        sub->add_option("--modes", o.cfg.bench_modes, "mixture modes")->capture_default_str();
        break;
      default:
        break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (const auto& [sub, command] : registered) {
    if (sub->parsed()) o.cfg.command = command;
  }
  auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };
  o.cfg.model_path = opt(o.model);
  o.cfg.witness_pool_path = opt(o.pool);
  o.cfg.labels_data = opt(o.labels_data);
  o.cfg.labels_model = opt(o.labels_model);
  o.cfg.labels_witness = opt(o.labels_witness);
  o.cfg.hierarchy_path = opt(o.hierarchy);
  o.cfg.corrupted_path = opt(o.corrupted);
  o.cfg.out_path = opt(o.out);
  o.cfg.include_weights = !o.no_weights;
  o.cfg.dropped = split_commas(o.dropped);
  if (o.present_count > 0) o.cfg.present_count = o.present_count;
  o.cfg.solver.rng_seed = o.cfg.seed;

  try {
    o.cfg.divergence = gel::parse_divergence(o.divergence);
    if (o.condition == "mean") {
      o.cfg.condition = gel::Condition::Mean;
    } else if (o.condition == "fid") {
      o.cfg.condition = gel::Condition::Fid;
    } else if (o.condition == "user") {
      o.cfg.condition = gel::Condition::User;
    } else {
      throw gel::GelError(gel::ErrorCode::InvalidArgument, "unknown condition: " + o.condition);
    }
    const gel::Report report = gel::run(o.cfg);
    if (o.cfg.out_path) gel::write_file(*o.cfg.out_path, gel::serialize_report(report));
    std::cout << gel::summary_line(report) << "\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
  } catch (const gel::GelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case gel::ErrorCode::SingularHessian:
      case gel::ErrorCode::NonFinite:
        return 1;
      default:
        return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
