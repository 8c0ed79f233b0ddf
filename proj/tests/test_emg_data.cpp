#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "myoadapt/emg_data.hpp"
#include "myoadapt/error.hpp"

using namespace myoadapt;
namespace fs = std::filesystem;

namespace {

Recording tiny_recording(std::vector<int> labels, std::vector<int> reps, int channels = 2) {
  Recording rec;
  rec.channels = channels;
  rec.labels = std::move(labels);
  rec.repetitions = std::move(reps);
  rec.samples.resize(static_cast<Eigen::Index>(rec.labels.size()), channels);
  for (Eigen::Index t = 0; t < rec.samples.rows(); ++t)
    for (int c = 0; c < channels; ++c) rec.samples(t, c) = 0.5 * t - c;
  return rec;
}

Segment segment_of_length(Eigen::Index len) {
  Segment seg;
  seg.class_id = 3;
  seg.repetition = 2;
  seg.samples = std::make_shared<const Eigen::MatrixXd>(Eigen::MatrixXd::Zero(len, 1));
  return seg;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "myoadapt_tests";
  fs::create_directories(dir);
  return dir / name;
}

SyntheticSubjectSpec small_spec(std::uint64_t seed) {
  SyntheticSubjectSpec s;
  s.movement_count = 2;
  s.channels = 3;
  s.amplitude = Eigen::MatrixXd::Constant(3, 3, 0.5);
  s.amplitude.row(1).setConstant(1.0);
  s.noise = Eigen::MatrixXd::Constant(3, 3, 0.1);
  s.gain = Eigen::VectorXd::Ones(3);
  s.offset = Eigen::VectorXd::Zero(3);
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("emg_data") {
  TEST_CASE("reported labels are shifted by one") {
    CHECK(to_reported_label(0) == 1);
    CHECK(to_reported_label(17) == 18);
    CHECK(from_reported_label(to_reported_label(5)) == 5);
  }

  TEST_CASE("window boundary cases") {
    const WindowingConfig cfg{400, 20};
    CHECK(window_segment(segment_of_length(400), cfg).size() == 1);
    CHECK(window_segment(segment_of_length(399), cfg).empty());
    const auto w = window_segment(segment_of_length(440), cfg);
    REQUIRE(w.size() == 3);
    CHECK(w[0].start == 0);
    CHECK(w[1].start == 20);
    CHECK(w[2].start == 40);
    CHECK(w[2].class_id == 3);
    CHECK(w[2].repetition == 2);
  }

  TEST_CASE("window count matches offset enumeration") {
    for (int len = 1; len <= 60; ++len)
      for (int wl = 1; wl <= 12; ++wl)
        for (int shift = 1; shift <= wl; ++shift) {
          std::vector<Eigen::Index> offsets;
          for (int s = 0; s < len; ++s)
            if (s % shift == 0 && s + wl <= len) offsets.push_back(s);
          const auto w = window_segment(segment_of_length(len), {wl, shift});
          REQUIRE(w.size() == offsets.size());
          for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i].start == offsets[i]);
          if (len >= wl) CHECK(static_cast<int>(w.size()) == (len - wl) / shift + 1);
        }
  }

  TEST_CASE("windowing config is validated") {
    CHECK_THROWS_AS(WindowingConfig({0, 1}).validate(), ConfigError);
    CHECK_THROWS_AS(WindowingConfig({10, 0}).validate(), ConfigError);
    CHECK_THROWS_AS(WindowingConfig({10, 11}).validate(), ConfigError);
    CHECK_NOTHROW(WindowingConfig({10, 10}).validate());
  }

  TEST_CASE("segments follow label runs and rest inherits repetitions") {
    const auto rec = tiny_recording({0, 0, 1, 1, 1, 0, 2, 2, 0}, {0, 0, 1, 1, 1, 0, 1, 1, 0});
    auto seg = segment_by_label(rec);
    REQUIRE(seg.size() == 5);
    CHECK(seg[0].length() == 2);
    CHECK(seg[1].class_id == 1);
    CHECK(seg[1].length() == 3);
    CHECK((*seg[1].samples)(0, 0) == rec.samples(2, 0));
    CHECK(seg[4].repetition == 0);
    inherit_rest_repetitions(seg);
    CHECK(seg[0].repetition == 1);
    CHECK(seg[2].repetition == 1);
    CHECK(seg[4].repetition == 1);
  }

  TEST_CASE("repetition split routes items and rejects overlap") {
    struct Item {
      int repetition;
    };
    std::vector<Item> items{{1}, {2}, {3}, {4}, {5}, {6}, {7}};
    const auto split = split_by_repetition<Item>(items, {1, 3, 4, 6}, {2, 5});
    CHECK(split.train.size() == 4);
    CHECK(split.test.size() == 2);
    CHECK(split.test[1].repetition == 5);
    CHECK_THROWS_AS(split_by_repetition<Item>(items, {1, 2}, {2}), ConfigError);
  }

  TEST_CASE("subsample keeps every stride-th item") {
    std::vector<int> v(25);
    for (int i = 0; i < 25; ++i) v[static_cast<std::size_t>(i)] = i;
    const auto s = subsample<int>(v, 10);
    CHECK(s == std::vector<int>{0, 10, 20});
    CHECK(subsample<int>(v, 1).size() == 25);
    CHECK_THROWS_AS(subsample<int>(v, 0), ConfigError);
  }

  TEST_CASE("csv round trip") {
    const auto rec = tiny_recording({0, 1, 1, 0}, {0, 1, 1, 0}, 3);
    const auto path = temp_file("roundtrip.csv");
    save_recording(path, rec);
    const auto back = load_recording(path, CsvSchema{});
    CHECK(back.channels == 3);
    CHECK(back.labels == rec.labels);
    CHECK(back.repetitions == rec.repetitions);
    CHECK(back.samples == rec.samples);
  }

  TEST_CASE("csv schema and parse errors") {
    const auto path = temp_file("bad.csv");
    {
      std::ofstream(path) << "emg1,emg2,restimulus\n0,1,0\n";
    }
    CHECK_THROWS_AS(load_recording(path, CsvSchema{}), SchemaError);
    {
      std::ofstream(path) << "emg1,emg2,restimulus,rerepetition\n0,1,0,0\n0,1,0\n";
    }
    try {
      load_recording(path, CsvSchema{});
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    {
      std::ofstream(path) << "emg1,emg2,restimulus,rerepetition\n0,1,0.5,0\n";
    }
    CHECK_THROWS_AS(load_recording(path, CsvSchema{}), ParseError);
    {
      std::ofstream(path) << "emg1,emg2,restimulus,rerepetition\n0,1,2.0,1\n";
    }
    CHECK(load_recording(path, CsvSchema{}).labels[0] == 2);
    CsvSchema wrong;
    wrong.channels = 3;
    CHECK_THROWS_AS(load_recording(path, wrong), SchemaError);
    CHECK_THROWS_AS(load_recording(temp_file("missing.csv"), CsvSchema{}), DataError);
  }

  TEST_CASE("movements not bracketed by rest are reported") {
    std::vector<std::string> warnings;
    const auto path = temp_file("unbracketed.csv");
    save_recording(path, tiny_recording({1, 1, 0, 2, 0}, {1, 1, 0, 1, 0}));
    load_recording(path, CsvSchema{}, &warnings);
    CHECK(warnings.size() == 1);
    CHECK(check_rest_bracketing(tiny_recording({0, 1, 0}, {0, 1, 0})).empty());
  }

  TEST_CASE("synthetic run order and repetitions") {
    const auto rec = generate_synthetic_recording(small_spec(1), 2, 3, 2);
    // Per round: rest, m1, rest, m2; then one closing rest.
    const std::vector<int> expect_labels{0, 0, 1, 1, 1, 0, 0, 2, 2, 2, 0, 0, 1, 1, 1,
                                         0, 0, 2, 2, 2, 0, 0};
    CHECK(rec.labels == expect_labels);
    const std::vector<int> expect_reps{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2,
                                       2, 2, 2, 2, 2, 2, 2};
    CHECK(rec.repetitions == expect_reps);
    CHECK(check_rest_bracketing(rec).empty());
  }

  TEST_CASE("synthetic generation is deterministic") {
    auto spec = small_spec(7);
    spec.run_variability = 0.3;
    spec.envelope_variability = 0.2;
    const auto a = generate_synthetic_recording(spec, 2, 50, 20);
    const auto b = generate_synthetic_recording(spec, 2, 50, 20);
    CHECK(a.samples == b.samples);
    spec.seed = 8;
    CHECK(generate_synthetic_recording(spec, 2, 50, 20).samples != a.samples);
  }

  TEST_CASE("gain and offset act as a channel-wise affine map") {
    auto base = small_spec(3);
    base.noise.setZero();
    base.run_variability = 0.2;
    auto shifted = base;
    shifted.gain.setConstant(2.0);
    const auto a = generate_synthetic_recording(base, 2, 40, 10);
    const auto b = generate_synthetic_recording(shifted, 2, 40, 10);
    CHECK(b.samples == (2.0 * a.samples).eval());

    shifted.gain << 2.0, 0.5, 3.0;
    shifted.offset << 1.0, -2.0, 0.25;
    base.noise.setConstant(0.1);
    shifted.noise.setConstant(0.1);
    const auto c = generate_synthetic_recording(base, 2, 40, 10);
    const auto d = generate_synthetic_recording(shifted, 2, 40, 10);
    for (int ch = 0; ch < 3; ++ch) {
      const Eigen::VectorXd mapped =
          (shifted.gain(ch) * c.samples.col(ch)).array() + shifted.offset(ch);
      CHECK((mapped - d.samples.col(ch)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("synthetic subject parameters are validated") {
    auto s = small_spec(1);
    s.gain(0) = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = small_spec(1);
    s.amplitude.resize(2, 3);
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(generate_synthetic_recording(small_spec(1), 0, 10, 10), ConfigError);
  }

  TEST_CASE("cohort specs share a pattern and differ in shift") {
    SyntheticCohortSpec cohort;
    cohort.subjects = 3;
    const auto specs = make_cohort_specs(cohort);
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].class_count() == cohort.movement_count + 1);
    CHECK(specs[0].gain != specs[1].gain);
    CHECK(specs[0].seed != specs[1].seed);
    CHECK(synthetic_subject_id(0) == "s01");
    CHECK(synthetic_subject_id(11) == "s12");
  }
}
