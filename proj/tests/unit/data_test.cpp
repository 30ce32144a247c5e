#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "gridbench/data.hpp"
#include "gridbench/metrics.hpp"
#include "gridbench/model.hpp"
#include "gridbench/preprocess.hpp"

using namespace gridbench;
using namespace gridbench::data;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = GRIDBENCH_FIXTURES;

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("gridbench_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

double test_auc(const Dataset& ds, model::ModelKind kind, std::uint64_t seed) {
  auto parts = split(ds, 0.7, seed);
  auto pipe = preprocess::fit_pipeline(parts.train, {});
  Matrix xtr = pipe.apply(parts.train), xte = pipe.apply(parts.test);
  auto m = model::train(kind, xtr, parts.train.labels(), {}, seed);
  std::vector<double> s;
  for (std::size_t i = 0; i < xte.rows(); ++i) s.push_back(m->score(xte.row(i)));
  return metrics::roc_auc(s, parts.test.labels());
}

}  // namespace

TEST(LoadCsv, DropsRowsWithMissingCells) {
  Dataset ds = load_csv(kFixtures / "flows.json");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.provenance().dropped_rows, 1u);
  EXPECT_EQ(ds.dimension(), 3u);
  EXPECT_EQ(ds.labels(), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(ds.purdue_level(), 3);
  EXPECT_EQ(ds.name(), "flows");
  ASSERT_EQ(ds.descriptors()[1].kind, FeatureKind::kCategorical);
  EXPECT_EQ(ds.descriptors()[1].categories, (std::vector<std::string>{"tcp", "icmp"}));
  EXPECT_EQ(std::get<double>(ds.rows()[1][2]), 300.0);
}

TEST(LoadCsv, LabelColumnExcludedFromFeatures) {
  Dataset ds = load_csv(kFixtures / "flows.json");
  for (const auto& d : ds.descriptors()) EXPECT_NE(d.name, "label");
}

TEST(LoadCsv, ThirdLabelValueIsNonBinary) {
  EXPECT_EQ(code_of([] { load_csv(kFixtures / "three_labels.json"); }), ErrorCode::kNonBinaryLabel);
}

TEST(LoadCsv, SameFileTwiceSameHash) {
  EXPECT_EQ(load_csv(kFixtures / "flows.json").content_hash(), load_csv(kFixtures / "flows.json").content_hash());
}

TEST(LoadCsv, Errors) {
  auto dir = temp_dir("errors");
  EXPECT_EQ(code_of([&] { load_csv(dir / "absent.json"); }), ErrorCode::kMissingFile);
  write(dir / "bad.json", "{not json");
  EXPECT_EQ(code_of([&] { load_csv(dir / "bad.json"); }), ErrorCode::kMalformedManifest);
  write(dir / "a.csv", "x,y\n1,yes\n2,no\n");
  write(dir / "nolabel.json",
        R"({"csv_path":"a.csv","label_column":"z","positive_label_values":["yes"],"columns":[{"name":"x","kind":"numeric"}]})");
  EXPECT_EQ(code_of([&] { load_csv(dir / "nolabel.json"); }), ErrorCode::kUnknownLabelColumn);
  write(dir / "nocsv.json",
        R"({"csv_path":"b.csv","label_column":"y","positive_label_values":["yes"],"columns":[]})");
  EXPECT_EQ(code_of([&] { load_csv(dir / "nocsv.json"); }), ErrorCode::kMissingFile);
  write(dir / "nocols.json", R"({"csv_path":"a.csv","label_column":"y","positive_label_values":["yes"]})");
  EXPECT_EQ(code_of([&] { load_csv(dir / "nocols.json"); }), ErrorCode::kMalformedManifest);
}

TEST(LoadCsv, QuotedFieldsAndMissingTokens) {
  auto dir = temp_dir("quoted");
  write(dir / "q.csv", "name,v,label\n\"a,b\",1,1\n\"say \"\"hi\"\"\",2,0\nc,NA,1\nd,?,0\ne,3,0\n");
  write(dir / "q.json",
        R"({"csv_path":"q.csv","label_column":"label","positive_label_values":["1"],"negative_label_values":["0"],
            "columns":[{"name":"name","kind":"categorical"},{"name":"v","kind":"numeric"}]})");
  Dataset ds = load_csv(dir / "q.json");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.provenance().dropped_rows, 2u);
  EXPECT_EQ(std::get<std::string>(ds.rows()[0][0]), "a,b");
  EXPECT_EQ(std::get<std::string>(ds.rows()[1][0]), "say \"hi\"");
}

TEST(ParseCsv, Rfc4180) {
  auto recs = parse_csv("a,b\r\n\"x\ny\",2\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1][0], "x\ny");
  EXPECT_THROW(parse_csv("a,\"b\n"), Error);
}

TEST(Synthetic, SeededDeterminism) {
  SyntheticSpec spec;
  spec.n = 100;
  spec.anomaly_fraction = 0.3;
  spec.d_categorical = 2;
  Dataset a = generate_synthetic(spec, 7), b = generate_synthetic(spec, 7);
  EXPECT_EQ(a.canonical_serialization(), b.canonical_serialization());
  EXPECT_EQ(a.content_hash(), b.content_hash());
  EXPECT_EQ(a.count_label(1), 30u);
  EXPECT_NE(generate_synthetic(spec, 8).content_hash(), a.content_hash());
}

TEST(Synthetic, InvalidSpecs) {
  SyntheticSpec s;
  s.n = 9;
  EXPECT_EQ(code_of([&] { generate_synthetic(s, 1); }), ErrorCode::kInvalidSpec);
  s = {};
  s.anomaly_fraction = 1.0;
  EXPECT_EQ(code_of([&] { generate_synthetic(s, 1); }), ErrorCode::kInvalidSpec);
  s = {};
  s.class_separation = -1;
  EXPECT_EQ(code_of([&] { generate_synthetic(s, 1); }), ErrorCode::kInvalidSpec);
}

// Without separation the labels carry no signal, so test AUC stays near 0.5.
TEST(Synthetic, NoSeparationGivesChanceAuc) {
  SyntheticSpec spec;
  spec.n = 400;
  spec.class_separation = 0.0;
  spec.d_categorical = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Dataset ds = generate_synthetic(spec, seed);
    for (auto kind : {model::ModelKind::kLogReg, model::ModelKind::kTree, model::ModelKind::kMlp}) {
      double auc = test_auc(ds, kind, seed);
      EXPECT_GE(auc, 0.3) << "seed " << seed;
      EXPECT_LE(auc, 0.7) << "seed " << seed;
    }
  }
}

TEST(Synthetic, WideSeparationIsNearlySeparable) {
  SyntheticSpec spec;
  spec.class_separation = 10.0;
  spec.d_numeric = 4;
  EXPECT_GE(test_auc(generate_synthetic(spec, 3), model::ModelKind::kLogReg, 3), 0.99);
}

TEST(Split, StratificationArithmetic) {
  SyntheticSpec spec;
  spec.n = 10;
  spec.anomaly_fraction = 0.5;
  Dataset ds = generate_synthetic(spec, 1);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto parts = split(ds, 0.8, seed);
    EXPECT_EQ(parts.train.count_label(0), 4u);
    EXPECT_EQ(parts.train.count_label(1), 4u);
  }
}

TEST(Split, PartitionAndDeterminism) {
  Dataset ds = generate_synthetic({}, 5);
  auto a = split(ds, 0.7, 11), b = split(ds, 0.7, 11);
  EXPECT_EQ(a.train.row_ids(), b.train.row_ids());
  EXPECT_EQ(a.test.row_ids(), b.test.row_ids());
  std::set<std::size_t> all(a.train.row_ids().begin(), a.train.row_ids().end());
  for (auto id : a.test.row_ids()) EXPECT_TRUE(all.insert(id).second);
  EXPECT_EQ(all.size(), ds.size());
  EXPECT_NE(split(ds, 0.7, 12).train.row_ids(), a.train.row_ids());
}

TEST(Split, DegenerateWhenAClassCannotCover) {
  std::vector<Row> rows{{1.0}, {2.0}, {3.0}};
  Dataset ds("tiny", std::nullopt, {{"x", FeatureKind::kNumeric, {}}}, rows, {0, 0, 1});
  EXPECT_EQ(code_of([&] { split(ds, 0.5, 1); }), ErrorCode::kDegenerateSplit);
}

TEST(Dataset, HashTracksEveryComponent) {
  std::vector<FeatureDescriptor> desc{{"x", FeatureKind::kNumeric, {}}};
  Dataset base("d", std::nullopt, desc, {{1.0}, {2.0}}, {0, 1});
  EXPECT_NE(base.content_hash(), Dataset("d", std::nullopt, desc, {{1.0}, {2.5}}, {0, 1}).content_hash());
  EXPECT_NE(base.content_hash(), Dataset("d", std::nullopt, desc, {{1.0}, {2.0}}, {1, 0}).content_hash());
  std::vector<FeatureDescriptor> renamed{{"y", FeatureKind::kNumeric, {}}};
  EXPECT_NE(base.content_hash(), Dataset("d", std::nullopt, renamed, {{1.0}, {2.0}}, {0, 1}).content_hash());
}

TEST(Dataset, InvariantsEnforced) {
  std::vector<FeatureDescriptor> desc{{"x", FeatureKind::kNumeric, {}}};
  EXPECT_THROW(Dataset("d", std::nullopt, desc, {{1.0}}, {2}), Error);
  EXPECT_THROW(Dataset("d", std::nullopt, desc, {{1.0, 2.0}}, {1}), Error);
  EXPECT_THROW(Dataset("d", std::nullopt, desc, {}, {}), Error);
  std::vector<FeatureDescriptor> dup{{"x", FeatureKind::kNumeric, {}}, {"x", FeatureKind::kNumeric, {}}};
  EXPECT_THROW(Dataset("d", std::nullopt, dup, {{1.0, 2.0}}, {1}), Error);
}
