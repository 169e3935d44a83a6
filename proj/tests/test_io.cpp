#include "gel/diagnostics.hpp"
#include "gel/io.hpp"
#include "gel/run.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

namespace gel {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("gel_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" +
             std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

// A version 1.0 header built by hand: magic, version, little-endian length,
// then the dict padded with spaces so the data starts on a 64-byte boundary.
std::string npy_header(const std::string& descr, bool fortran, const std::string& shape) {
  std::string dict = "{'descr': '" + descr + "', 'fortran_order': " + (fortran ? "True" : "False") +
                     ", 'shape': " + shape + ", }";
  const std::size_t prefix = 10;
  std::size_t total = prefix + dict.size() + 1;
  total = (total + 63) / 64 * 64;
  dict.append(total - prefix - dict.size() - 1, ' ');
  dict.push_back('\n');
  std::string out = "\x93NUMPY";
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(dict.size());
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>(len >> 8));
  return out + dict;
}

template <class T>
std::string raw_bytes(const std::vector<T>& values) {
  std::string out(values.size() * sizeof(T), '\0');
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

int run_cli(const std::string& args, std::string* stdout_text = nullptr) {
  const std::string cmd = std::string(GELCLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::string text;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) text += buf;
  const int status = ::pclose(pipe);
  if (stdout_text) *stdout_text = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_lines(const std::string& path, const std::vector<Label>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << "\n";
}

TEST(Npy, ParsesHandBuiltDoubleArray) {
  const std::vector<double> values = {1, 2, 3, 4, 5.5, -6};
  const Matrix m = parse_npy(npy_header("<f8", false, "(3, 2)") + raw_bytes(values));
  ASSERT_EQ(m.rows(), 3);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_EQ(m(0, 1), 2.0);
  EXPECT_EQ(m(2, 0), 5.5);
  EXPECT_EQ(m(2, 1), -6.0);
}

TEST(Npy, ParsesFloatArray) {
  const std::vector<float> values = {0.5f, 1.5f, 2.5f, 3.5f};
  const Matrix m = parse_npy(npy_header("<f4", false, "(2, 2)") + raw_bytes(values));
  EXPECT_EQ(m(1, 0), 2.5);
}

TEST(Npy, RejectsUnsupported) {
  const std::string data = raw_bytes(std::vector<double>(6, 1.0));
  EXPECT_THROW(parse_npy(npy_header("<f8", true, "(3, 2)") + data), GelError);
  EXPECT_THROW(parse_npy(npy_header(">f8", false, "(3, 2)") + data), GelError);
  EXPECT_THROW(parse_npy(npy_header("<i8", false, "(3, 2)") + data), GelError);
  EXPECT_THROW(parse_npy(npy_header("<f8", false, "(6,)") + data), GelError);
  EXPECT_THROW(parse_npy(npy_header("<f8", false, "(1, 3, 2)") + data), GelError);
  EXPECT_THROW(parse_npy(npy_header("<f8", false, "(3, 2)") + data.substr(8)), GelError);
  EXPECT_THROW(parse_npy("not an npy file at all"), GelError);
  std::string v2 = npy_header("<f8", false, "(3, 2)") + data;
  v2[6] = '\x02';
  EXPECT_THROW(parse_npy(v2), GelError);
}

TEST(Npy, WriterRoundTripsBitwise) {
  TempDir dir;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e3);
  Matrix m(17, 5);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  m(0, 0) = -0.0;
  m(1, 1) = std::numeric_limits<double>::denorm_min();
  m(2, 2) = std::numeric_limits<double>::max();
  const std::string path = dir.file("m.npy");
  write_npy(path, m);
  const Matrix back = read_npy(path);
  ASSERT_EQ(back.rows(), m.rows());
  ASSERT_EQ(back.cols(), m.cols());
  EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * static_cast<std::size_t>(m.size())), 0);

  const std::string bytes = encode_npy(m);
  const auto header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + header_len) % 64, 0);
  EXPECT_EQ(bytes.size(), 10 + header_len + 17 * 5 * sizeof(double));
}

TEST(Csv, Parsing) {
  const Matrix m = parse_csv("1,2\n3,4");
  ASSERT_EQ(m.rows(), 2);
  EXPECT_EQ(m(1, 1), 4.0);
  const Matrix h = parse_csv("x,y\r\n1.5,2\r\n3,-4e2\n\n");
  ASSERT_EQ(h.rows(), 2);
  EXPECT_EQ(h(1, 1), -400.0);
  EXPECT_THROW(parse_csv("1,2\n3"), GelError);
  EXPECT_THROW(parse_csv(""), GelError);
  EXPECT_THROW(parse_csv("1,2\n3,abc"), GelError);
}

TEST(LoadFeatures, FormatsAndLabels) {
  TempDir dir;
  write_npy(dir.file("a.npy"), (Matrix(3, 2) << 1, 2, 3, 4, 5, 6).finished());
  {
    std::ofstream(dir.file("a.csv")) << "1,2\n3,4\n5,6\n";
  }
  write_lines(dir.file("three.txt"), {"cat", "dog", "cat"});
  write_lines(dir.file("five.txt"), {"1", "2", "3", "4", "5"});
  EXPECT_EQ(infer_format("x.npy"), FeatureFormat::Npy);
  EXPECT_EQ(infer_format("x.csv"), FeatureFormat::Csv);

  const FeatureSet a = load_features(dir.file("a.npy"), std::nullopt, dir.file("three.txt"));
  EXPECT_EQ(a.size(), 3);
  EXPECT_EQ(a.dim(), 2);
  ASSERT_TRUE(a.labels);
  EXPECT_EQ((*a.labels)[1], "dog");
  EXPECT_EQ(a.ids, (std::vector<SampleId>{0, 1, 2}));
  const FeatureSet c = load_features(dir.file("a.csv"));
  EXPECT_EQ(c.features, a.features);
  EXPECT_THROW(load_features(dir.file("a.npy"), std::nullopt, dir.file("five.txt")), GelError);
  try {
    load_features(dir.file("missing.npy"));
    FAIL();
  } catch (const GelError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

Report sample_report() {
  Report r;
  r.config = {{"command", "kgel2"}, {"seed", 3}};
  r.command = "kgel2";
  r.status = "converged";
  r.divergence = "et";
  r.two_sample = true;
  r.divergence_nats = 0.125;
  r.divergence_bits = 0.125 / std::log(2.0);
  r.model_divergence_nats = std::numeric_limits<double>::infinity();
  r.model_divergence_bits = std::numeric_limits<double>::infinity();
  r.score = "+inf/1.090";
  r.wilks = 0.1 + 0.2;
  r.hull = "inside";
  r.hull_distance = 1e-300;
  r.iterations = 12;
  r.final_grad_norm = 3e-9;
  r.hessian_rank = 4;
  r.hotelling_t2 = 0.25;
  r.data_weights = std::vector<SampleWeight>{{0, 0.7}, {9, 0.3}};
  r.model_weights = std::vector<SampleWeight>{{4, 1.0}};
  r.alpha = 0;
  r.beta = 1;
  ClassReport cr;
  cr.class_mass = {{"a", 0.7}, {"b", 0.3}};
  cr.rescaled = {{"a", 1.4}, {"b", 0.6}};
  cr.oracle = std::map<Label, double>{{"a", 0.5}, {"b", 0.5}};
  cr.hellinger_to_oracle = 0.1;
  r.class_report = cr;
  r.pr_curve = PrCurve{{{0.0, 1.0, 0.5}, {0.3, 0.5, 1.0}}, 0.875};
  r.ranking = std::vector<RankedSample>{{9, 0.3}, {0, 0.7}};
  r.per_class = {{"a", {{"status", "converged"}}}};
  r.warnings = {"w1"};
  r.seed = 3;
  r.timing_seconds = 0.5;
  return r;
}

TEST(ReportJson, RoundTripIsLossless) {
  const Report r = sample_report();
  const nlohmann::json j = report_to_json(r);
  EXPECT_EQ(j["model_divergence_nats"], "+inf");
  const Report back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(report_to_json(back), j);
  EXPECT_EQ(back.wilks, r.wilks);
  EXPECT_EQ(*back.hull_distance, 1e-300);
  EXPECT_TRUE(std::isinf(*back.model_divergence_nats));
  EXPECT_THROW(report_from_json(nlohmann::json::object()), GelError);
}

class RunFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    const FeatureSet data = gen_gaussian_mixture(3, 6.0, {150, 150, 150}, 4, 11);
    const FeatureSet model = gen_gaussian_mixture(3, 6.0, {40, 40, 0}, 4, 12);
    write_npy(dir.file("data.npy"), data.features);
    write_npy(dir.file("model.npy"), model.features);
    write_lines(dir.file("data_labels.txt"), *data.labels);
    write_lines(dir.file("model_labels.txt"), *model.labels);
    Matrix far = data.features;
    far.array() += 1000.0;
    write_npy(dir.file("far.npy"), far);
  }

  RunConfig base(Command command) const {
    RunConfig cfg;
    cfg.command = command;
    cfg.data_path = dir.file("data.npy");
    cfg.model_path = dir.file("model.npy");
    cfg.witness_count = 16;
    cfg.seed = 5;
    cfg.pca = true;
    return cfg;
  }

  TempDir dir;
};

TEST_F(RunFixture, Kgel2IdenticalFilesScoreOne) {
  RunConfig cfg = base(Command::Kgel2);
  cfg.model_path = cfg.data_path;
  const Report r = run(cfg);
  EXPECT_EQ(r.status, "converged");
  EXPECT_EQ(r.score, "1.000/1.000");
  ASSERT_TRUE(r.alpha);
  EXPECT_EQ(*r.alpha, 0);
  EXPECT_EQ(r.beta, 0);
  double total = 0.0;
  for (const auto& w : *r.data_weights) total += w.weight;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST_F(RunFixture, MeanTestOutsideHullIsInfinite) {
  RunConfig cfg = base(Command::MeanTest);
  cfg.model_path = dir.file("far.npy");
  const Report r = run(cfg);
  EXPECT_EQ(r.status, "hull-fail");
  EXPECT_EQ(r.score, "+inf");
  EXPECT_EQ(serialize_report(r).find("\"divergence_nats\": \"+inf\"") != std::string::npos, true);
}

TEST_F(RunFixture, ReportsAreByteIdenticalAcrossRuns) {
  for (Command c : {Command::MeanTest, Command::Kgel, Command::Kgel2, Command::ModeReport,
                    Command::Rank, Command::HullCheck}) {
    RunConfig cfg = base(c);
    cfg.labels_data = dir.file("data_labels.txt");
    cfg.labels_model = dir.file("model_labels.txt");
    Report a = run(cfg);
    Report b = run(cfg);
    a.timing_seconds = 0.0;
    b.timing_seconds = 0.0;
    EXPECT_EQ(serialize_report(a), serialize_report(b)) << command_name(c);
  }
}

TEST_F(RunFixture, ConfigEchoResolvesDefaults) {
  const Report r = run(base(Command::Kgel));
  EXPECT_EQ(r.config["witness_count"], 16);
  EXPECT_EQ(r.config["solver"]["grad_tolerance"], 1e-8);
  EXPECT_EQ(r.config["solver"]["max_iterations"], 200);
  EXPECT_EQ(r.config["divergence"], "et");
  EXPECT_EQ(r.config["kernel"], "exponential");
}

TEST_F(RunFixture, ModeReportFindsMissingClass) {
  RunConfig cfg = base(Command::ModeReport);
  cfg.labels_data = dir.file("data_labels.txt");
  cfg.dropped = {"2"};
  const Report r = run(cfg);
  ASSERT_TRUE(r.class_report);
  EXPECT_LT(r.class_report->class_mass.at("2"), 0.01);
  ASSERT_TRUE(r.class_report->hellinger_to_oracle);
  EXPECT_LT(*r.class_report->hellinger_to_oracle, 0.1);
}

TEST_F(RunFixture, PerClassRunsNestReports) {
  RunConfig cfg = base(Command::ModeReport);
  cfg.labels_data = dir.file("data_labels.txt");
  cfg.labels_model = dir.file("model_labels.txt");
  cfg.per_class = true;
  cfg.witness_count = 8;
  const Report r = run(cfg);
  EXPECT_EQ(r.per_class.size(), 3u);
  EXPECT_TRUE(r.per_class.contains("0"));
}

TEST_F(RunFixture, RankAndLabelTest) {
  RunConfig rank = base(Command::Rank);
  rank.bottom = 5;
  const Report r = run(rank);
  ASSERT_TRUE(r.ranking);
  EXPECT_EQ(r.ranking->size(), 5u);
  for (std::size_t k = 1; k < r.ranking->size(); ++k) {
    EXPECT_LE((*r.ranking)[k - 1].weight, (*r.ranking)[k].weight);
  }

  std::vector<Label> flags;
  for (int i = 0; i < 450; ++i) flags.push_back(i % 4 == 0 ? "1" : "0");
  write_lines(dir.file("flags.txt"), flags);
  RunConfig label = base(Command::LabelTest);
  label.kernel = "product-delta";
  label.labels_data = dir.file("data_labels.txt");
  label.labels_model = dir.file("model_labels.txt");
  label.corrupted_path = dir.file("flags.txt");
  label.two_sample = true;
  const Report l = run(label);
  EXPECT_TRUE(l.pr_curve);
}

TEST_F(RunFixture, InvalidCombinations) {
  RunConfig cfg = base(Command::LabelTest);
  EXPECT_THROW(run(cfg), GelError);  // needs a product kernel
  cfg.kernel = "product-delta";
  EXPECT_THROW(run(cfg), GelError);  // needs labels
  RunConfig nodata = base(Command::Kgel);
  nodata.data_path.clear();
  EXPECT_THROW(run(nodata), GelError);
  RunConfig badkernel = base(Command::Kgel);
  badkernel.kernel = "gaussian";
  EXPECT_THROW(run(badkernel), GelError);
}

TEST_F(RunFixture, CliExitCodesAndOutput) {
  std::string out;
  EXPECT_EQ(run_cli("kgel2 --data " + dir.file("data.npy") + " --model " + dir.file("data.npy") +
                        " --witness-count 8",
                    &out),
            0);
  EXPECT_NE(out.find("score=1.000/1.000"), std::string::npos) << out;

  const std::string report = dir.file("r.json");
  EXPECT_EQ(run_cli("mean-test --data " + dir.file("data.npy") + " --model " + dir.file("far.npy") +
                        " --out " + report,
                    &out),
            0);
  EXPECT_NE(out.find("score=+inf"), std::string::npos) << out;
  const Report parsed = report_from_json(nlohmann::json::parse(read_file(report)));
  EXPECT_EQ(parsed.status, "hull-fail");

  EXPECT_EQ(run_cli("kgel --data " + dir.file("missing.npy") + " --model " + dir.file("data.npy")), 2);
  EXPECT_EQ(run_cli("kgel --bogus-flag"), 2);
  EXPECT_EQ(run_cli("mean-test --data " + dir.file("data.npy") + " --model " + dir.file("model.npy") +
                    " --divergence chi2"),
            2);
  EXPECT_EQ(run_cli("hull-check --data " + dir.file("data.npy") + " --model " + dir.file("model.npy"), &out), 0);
  EXPECT_NE(out.find("status=inside"), std::string::npos) << out;
}

}  // namespace
}  // namespace gel
