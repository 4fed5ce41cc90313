#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adasiam/checkpoint.hpp"
#include "adasiam/io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using adasiam::read_text_file;
using adasiam::write_text_file;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "adasiam_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(ADASIAM_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& rel) { return (kRoot / rel).string(); }

std::size_t line_count(const fs::path& f) {
  const std::string s = read_text_file(f);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

constexpr char kSmallConfig[] = R"({
  "siamese": {"input_size": 64, "widths": [4, 8, 8, 16, 16], "fc_width": 64},
  "men": {"channels": 8},
  "sampler": {"n_candidates": 64},
  "tracker": {"first_positives": 100, "first_negatives": 400, "frame_positives": 20,
              "frame_negatives": 40, "men_frame_positives": 5},
  "wcnn": {"hidden": 16, "initial_iterations": 20, "online_iterations": 3, "negative_pool": 128},
  "training": {"siamese_epochs": 3, "groups_per_sequence": 2, "fmen_iterations": 5}
})";

}  // namespace

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    write_text_file(kRoot / "small.json", kSmallConfig);
    write_text_file(kRoot / "one.json", R"({"name": "one", "length": 10, "texture_seed": 3})");
    write_text_file(kRoot / "corpus.json",
                    R"([{"name": "a", "length": 8, "texture_seed": 3}, {"name": "b", "length": 8, "texture_seed": 4}])");
    ASSERT_EQ(run("synth --spec " + p("corpus.json") + " --out " + p("corpus") + " --seed 5"), 0);
    ASSERT_EQ(run("train --config " + p("small.json") + " --corpus " + p("corpus") + " --out " + p("model")), 0);
  }
};

TEST_F(Cli, SynthWritesFramesGroundTruthAndManifest) {
  ASSERT_EQ(run("synth --spec " + p("one.json") + " --out " + p("one") + " --seed 2"), 0);
  for (int t = 1; t <= 10; ++t) EXPECT_TRUE(fs::exists(kRoot / "one" / adasiam::frame_file_name(t)));
  EXPECT_FALSE(fs::exists(kRoot / "one" / adasiam::frame_file_name(11)));
  EXPECT_EQ(line_count(kRoot / "one" / "groundtruth.txt"), 10u);
  EXPECT_TRUE(fs::exists(kRoot / "one" / "manifest.json"));

  ASSERT_EQ(run("synth --spec " + p("one.json") + " --out " + p("one_again") + " --seed 2"), 0);
  for (int t = 1; t <= 10; ++t) {
    const std::string f = adasiam::frame_file_name(t);
    EXPECT_EQ(read_text_file(kRoot / "one" / f), read_text_file(kRoot / "one_again" / f));
  }
  ASSERT_EQ(run("rerun " + p("one/manifest.json") + " --out " + p("one_rerun")), 0);
  EXPECT_EQ(read_text_file(kRoot / "one" / "0007.png"), read_text_file(kRoot / "one_rerun" / "0007.png"));
}

TEST_F(Cli, SynthErrors) {
  EXPECT_EQ(run("synth --spec " + p("one.json") + " --out /proc/adasiam_cannot_write"), 2);
  write_text_file(kRoot / "bad.json", R"({"name": "x", "lenght": 10})");
  EXPECT_EQ(run("synth --spec " + p("bad.json") + " --out " + p("bad")), 2);
  EXPECT_EQ(run("synth --out " + p("bad")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, TrainOutputs) {
  EXPECT_EQ(line_count(kRoot / "model" / "loss.csv"), 1u + 3u);
  const auto records = adasiam::load_checkpoint(kRoot / "model" / "models.adsm");
  EXPECT_EQ(adasiam::encode_checkpoint(records), read_text_file(kRoot / "model" / "models.adsm"));
  ASSERT_EQ(run("train --config " + p("small.json") + " --corpus " + p("corpus") + " --out " + p("model2")), 0);
  EXPECT_EQ(read_text_file(kRoot / "model" / "loss.csv"), read_text_file(kRoot / "model2" / "loss.csv"));
  EXPECT_EQ(read_text_file(kRoot / "model" / "models.adsm"), read_text_file(kRoot / "model2" / "models.adsm"));
  fs::create_directories(kRoot / "empty");
  EXPECT_EQ(run("train --corpus " + p("empty") + " --out " + p("model3")), 2);
}

TEST_F(Cli, TrackOutputsAndDeterminism) {
  const std::string base = "track --config " + p("small.json") + " --model " + p("model/models.adsm") +
                           " --sequence " + p("corpus/a");
  ASSERT_EQ(run(base + " --out " + p("trk1") + " --overlay"), 0);
  ASSERT_EQ(run(base + " --out " + p("trk2")), 0);
  EXPECT_EQ(line_count(kRoot / "trk1" / "frames.csv"), 1u + 7u);
  EXPECT_EQ(read_text_file(kRoot / "trk1" / "frames.csv"), read_text_file(kRoot / "trk2" / "frames.csv"));
  EXPECT_EQ(read_text_file(kRoot / "trk1" / "fused.csv"), read_text_file(kRoot / "trk2" / "fused.csv"));
  EXPECT_TRUE(fs::exists(kRoot / "trk1" / "overlays" / "0008.png"));

  ASSERT_EQ(run("rerun " + p("trk1/manifest.json") + " --out " + p("trk_rerun")), 0);
  EXPECT_EQ(read_text_file(kRoot / "trk1" / "frames.csv"), read_text_file(kRoot / "trk_rerun" / "frames.csv"));

  std::istringstream rows(read_text_file(kRoot / "trk1" / "frames.csv"));
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::vector<double> v;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) v.push_back(std::stod(c));
    ASSERT_EQ(v.size(), 9u);
    EXPECT_GT(v[3], 0.0);
    EXPECT_GT(v[4], 0.0);
  }
}

TEST_F(Cli, TrackNoWcnnHasZeroWeights) {
  ASSERT_EQ(run("track --config " + p("small.json") + " --model " + p("model/models.adsm") + " --sequence " +
                p("corpus/b") + " --out " + p("nowcnn") + " --ablate no-wcnn --maps"),
            0);
  std::istringstream rows(read_text_file(kRoot / "nowcnn" / "fused.csv"));
  std::string line;
  std::getline(rows, line);
  std::size_t n = 0;
  while (std::getline(rows, line)) {
    std::vector<std::string> c;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) c.push_back(x);
    EXPECT_EQ(c[3], "0");
    EXPECT_EQ(c[2], c[4]);
    ++n;
  }
  EXPECT_GT(n, 0u);
  EXPECT_TRUE(fs::exists(kRoot / "nowcnn" / "maps" / "0002.csv"));
  EXPECT_TRUE(fs::exists(kRoot / "nowcnn" / "maps" / "0002.png"));
}

TEST_F(Cli, TrackErrors) {
  // default config expects wider layers than the checkpoint holds
  EXPECT_EQ(run("track --model " + p("model/models.adsm") + " --sequence " + p("corpus/a") + " --out " + p("x1")), 2);
  EXPECT_EQ(run("track --config " + p("small.json") + " --model " + p("model/models.adsm") + " --sequence " +
                p("corpus/a") + " --out " + p("x2") + " --ablate no-siamese"),
            2);
  write_text_file(kRoot / "typo.json", R"({"tracker": {"etaa": 0.5}})");
  EXPECT_EQ(run("track --config " + p("typo.json") + " --model " + p("model/models.adsm") + " --sequence " +
                p("corpus/a") + " --out " + p("x3")),
            2);
  EXPECT_EQ(run("track --config " + p("small.json") + " --model " + p("missing.adsm") + " --sequence " +
                p("corpus/a") + " --out " + p("x4")),
            2);
}

TEST_F(Cli, EvalFixture) {
  // 10x10 target; frame 1 exact, frames 2-4 shifted right by 5, 15, 25 px
  fs::create_directories(kRoot / "fx" / "seq");
  write_text_file(kRoot / "fx" / "seq" / "groundtruth.txt", "10,10,10,10\n10,10,10,10\n10,10,10,10\n10,10,10,10\n");
  write_text_file(kRoot / "fx" / "pred.csv",
                  "frame,x,y,w,h,score,buffer_size,updated_short,updated_long\n"
                  "2,15,10,10,10,1,0,0,0\n3,25,10,10,10,1,0,0,0\n4,35,10,10,10,1,0,0,0\n");
  ASSERT_EQ(run("eval --pred " + p("fx/pred.csv") + " --gt " + p("fx/seq") + " --out " + p("fx/out")), 0);
  const std::string summary = read_text_file(kRoot / "fx" / "out" / "summary.txt");
  const std::string last = summary.substr(summary.rfind("DP20="));
  double dp = 0, auc = 0;
  ASSERT_EQ(std::sscanf(last.c_str(), "DP20=%lf,AUC=%lf", &dp, &auc), 2);
  EXPECT_EQ(dp, 0.75);
  // IoUs {1, 1/3, 0, 0}: 7 thresholds at 2/4, 13 at 1/4, theta=1 at 0
  EXPECT_NEAR(auc, (7 * 0.5 + 13 * 0.25) / 21.0, 1e-12);

  write_text_file(kRoot / "fx" / "perfect.csv", "frame,x,y,w,h\n2,10,10,10,10\n3,10,10,10,10\n4,10,10,10,10\n");
  ASSERT_EQ(run("eval --pred " + p("fx/perfect.csv") + " --gt " + p("fx/seq") + " --out " + p("fx/out2")), 0);
  EXPECT_NE(read_text_file(kRoot / "fx" / "out2" / "summary.txt").find("DP20=1,"), std::string::npos);
}

TEST_F(Cli, EvalErrors) {
  EXPECT_EQ(run("eval --out " + p("e1")), 2);
  fs::create_directories(kRoot / "fx2");
  write_text_file(kRoot / "fx2" / "pred.csv", "frame,x,y,w,h\n2,1,1,5,5\n");
  EXPECT_EQ(run("eval --pred " + p("fx2/pred.csv") + " --gt " + p("fx2/nothing") + " --out " + p("e2")), 2);
}
