/*
 * Copyright 2026 The vbmask Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Drives the installed binary end to end; exit codes and output files are
// the contract here.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vbmask_cli_" + std::string(::testing::UnitTest::GetInstance()
                                            ->current_test_info()
                                            ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  void WriteFile(const std::string& name, const std::string& text) {
    std::ofstream(Path(name)) << text;
  }

  std::string ReadFile(const std::string& path) const {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Runs the CLI with stdout and stderr captured; returns the exit code.
  int Run(const std::string& args) {
    const std::string cmd = std::string(VBMASK_CLI) + " " + args + " >" + Path("stdout") +
                            " 2>" + Path("stderr");
    const int status = std::system(cmd.c_str());
    out_ = ReadFile(Path("stdout"));
    err_ = ReadFile(Path("stderr"));
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
  std::string out_, err_;
};

TEST_F(Cli, UnknownFlagPrintsUsage) {
  EXPECT_EQ(Run("train --no-such-flag"), 2);
  EXPECT_NE(err_.find("Usage"), std::string::npos) << err_;
}

TEST_F(Cli, MissingSubcommand) { EXPECT_EQ(Run(""), 2); }

TEST_F(Cli, BadPrecisionValue) { EXPECT_EQ(Run("train --precision f16"), 2); }

TEST_F(Cli, ConfigErrorExitsTwo) {
  WriteFile("bad.json", R"({"train": {"stepz": 3}})");
  EXPECT_EQ(Run("train --config " + Path("bad.json") + " --out " + Path("o")), 2);
  EXPECT_NE(err_.find("stepz"), std::string::npos) << err_;
  WriteFile("broken.json", "{");
  EXPECT_EQ(Run("train --config " + Path("broken.json")), 2);
  EXPECT_EQ(Run("train --config " + Path("absent.json")), 2);
}

TEST_F(Cli, TooFewWorkersIsConfigError) {
  EXPECT_EQ(Run("train --workers 2 --out " + Path("o")), 2);
}

TEST_F(Cli, IntegrityAbortExitsThree) {
  WriteFile("faulty.json", R"({"train": {"steps": 4},
    "workers": {"profiles": [{"id": 0, "behavior": "faulty", "perturbation_scale": 0.01,
                              "fault_probability": 1.0}]}})");
  EXPECT_EQ(Run("train --config " + Path("faulty.json") + " --out " + Path("o")), 3);
  EXPECT_EQ(Run("infer --config " + Path("faulty.json") + " --out " + Path("o")), 3);
  EXPECT_EQ(Run("verify-integrity --batches 5 --config " + Path("faulty.json") + " --out " +
                Path("o")),
            3);
}

TEST_F(Cli, TrainWritesOutputs) {
  WriteFile("t.json", R"({"train": {"steps": 30}})");
  ASSERT_EQ(Run("train --config " + Path("t.json") + " --seed 7 --out " + Path("o")), 0) << err_;
  const auto run = nlohmann::json::parse(ReadFile(Path("o/run.json")));
  EXPECT_EQ(run.at("seed"), 7);
  EXPECT_EQ(run.at("command"), "train");
  std::istringstream metrics(ReadFile(Path("o/metrics.jsonl")));
  std::string line;
  int epochs = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("val_acc"));
    ++epochs;
  }
  EXPECT_GT(epochs, 0);
  EXPECT_FALSE(ReadFile(Path("o/transcript.jsonl")).empty());

  ASSERT_EQ(Run("infer --config " + Path("t.json") + " --seed 7 --out " + Path("i") +
                " --weights " + Path("o/weights.json")),
            0)
      << err_;
  EXPECT_NE(out_.find("agreement with plaintext 1"), std::string::npos) << out_;
}

TEST_F(Cli, FlagsOverrideConfig) {
  ASSERT_EQ(Run("analyze-privacy --precision f32 --workers 9 --paper-literal --seed 5 --out " +
                Path("o")),
            0)
      << err_;
  const auto run = nlohmann::json::parse(ReadFile(Path("o/run.json")));
  EXPECT_EQ(run.at("train").at("precision"), "f32");
  EXPECT_EQ(run.at("workers").at("count"), 9);
  EXPECT_EQ(run.at("privacy").at("paper_literal"), true);
  EXPECT_EQ(run.at("seed"), 5);
}

TEST_F(Cli, AnalyzePrivacyTable) {
  ASSERT_EQ(Run("analyze-privacy --bits --out " + Path("o")), 0) << err_;
  const std::string csv = ReadFile(Path("o/privacy.csv"));
  for (const char* v : {"1.25e-06", "8e-07", "2e-07", "5e-08"}) {
    EXPECT_NE(csv.find(v), std::string::npos) << v;
  }
  EXPECT_NE(out_.find("2.5e-08"), std::string::npos) << out_;
  EXPECT_NE(out_.find("bits"), std::string::npos) << out_;
}

TEST_F(Cli, AnalyzePrivacyDirect) {
  WriteFile("p.json", R"({"privacy": {"preset": "direct", "alpha_ratio": 10,
                          "sigma2_list": [4e8]}})");
  ASSERT_EQ(Run("analyze-privacy --config " + Path("p.json") + " --out " + Path("o")), 0);
  EXPECT_NE(ReadFile(Path("o/privacy.csv")).find("2.5e-08"), std::string::npos);
}

TEST_F(Cli, AttackDemo) {
  WriteFile("a.json", R"({"privacy": {"attack": {"colluders": 1, "trials": 3,
                          "sigma2_list": [1e2, 1e8]}}})");
  ASSERT_EQ(Run("attack-demo --config " + Path("a.json") + " --out " + Path("o")), 0) << err_;
  std::istringstream csv(ReadFile(Path("o/attack.csv")));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 6);
}

TEST_F(Cli, VerifyIntegrityHonest) {
  ASSERT_EQ(Run("verify-integrity --batches 20 --out " + Path("o")), 0) << err_;
  EXPECT_NE(out_.find("0/20"), std::string::npos) << out_;
}

TEST_F(Cli, Selftest) {
  ASSERT_EQ(Run("selftest"), 0) << out_ << err_;
  EXPECT_NE(out_.find("all checks passed"), std::string::npos);
  EXPECT_EQ(out_.find("FAIL"), std::string::npos) << out_;
}

}  // namespace
