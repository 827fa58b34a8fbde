// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "catsynth/analysis.hpp"
#include "catsynth/concept_tree.hpp"
#include "catsynth/content_store.hpp"
#include "catsynth/dataset.hpp"
#include "catsynth/records.hpp"
#include "cli.hpp"
#include "scripted.hpp"

namespace catsynth {
namespace {

namespace fs = std::filesystem;

int run(std::vector<std::string> args, std::string* log_out = nullptr) {
    std::ostringstream log;
    const int code = cli::run(args, log);
    if (log_out != nullptr) {
        *log_out = log.str();
    }
    return code;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = testing::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        write_file_atomic(dir_ / "tree.json", serialize(testing::dog_tree()));
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string p(const std::string& rel) const { return (dir_ / rel).string(); }

    fs::path dir_;
};

TEST(ExitCodes, OnePerFamily) {
    EXPECT_EQ(cli::exit_code(ErrorFamily::Config), 2);
    EXPECT_EQ(cli::exit_code(ErrorFamily::Backend), 3);
    EXPECT_EQ(cli::exit_code(ErrorFamily::Validation), 4);
    EXPECT_EQ(cli::exit_code(ErrorFamily::Io), 5);
}

TEST(Config, DefaultsAndRejections) {
    const auto c = cli::parse_config("{}");
    EXPECT_EQ(c.thresholds.positive, 0.3);
    EXPECT_EQ(c.thresholds.hard_negative, 0.1);
    EXPECT_EQ(c.thresholds.text, 0.2);
    EXPECT_EQ(c.perturb.patch_size, 14);
    for (const char* bad : {"{\"no_such_key\": 1}", "{\"seed\": \"x\"}", "[1]", "{",
                            "{\"perturb\": {\"patch_size\": 0}}"}) {
        try {
            cli::parse_config(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(family(e.code()), ErrorFamily::Config) << bad;
        }
    }
}

TEST_F(Cli, RemovingMoreDimensionsThanExistFailsValidation) {
    std::string log;
    EXPECT_EQ(run({"edit-tree", p("tree.json"), "--op", "remove", "--times", "99", "--out", p("out.json"), "--mock",
                   "--store", p("store")},
                  &log),
              4);
    EXPECT_FALSE(fs::exists(p("out.json")));
    EXPECT_NE(log.find("\"exit\":4"), std::string::npos) << log;
}

TEST_F(Cli, ConfigErrorsExitBeforeWork) {
    write_file_atomic(dir_ / "bad.json", "{\"thresholds\": {\"positive\": \"high\"}}");
    EXPECT_EQ(run({"easy-tree", p("tree.json"), "--out", p("out.json"), "--mock", "--store", p("store"), "--config",
                   p("bad.json")}),
              2);
    EXPECT_FALSE(fs::exists(p("out.json")));
    EXPECT_EQ(run({"no-such-command"}), 2);
    EXPECT_EQ(run({"edit-tree", p("tree.json"), "--op", "rotate", "--out", p("out.json"), "--store", p("store")}), 2);
    // without --mock there is no chat backend configured
    EXPECT_EQ(run({"easy-tree", p("tree.json"), "--out", p("out.json"), "--store", p("store")}), 2);
}

TEST_F(Cli, MissingInputIsIoError) {
    EXPECT_EQ(run({"gen-prompts", p("absent.json"), "--role", "positive", "--out", p("plan.jsonl"), "--mock", "--store",
                   p("store")}),
              5);
}

TEST_F(Cli, MalformedInputIsValidationError) {
    write_file_atomic(dir_ / "broken.json", "{\"root\": ");
    EXPECT_EQ(run({"gen-prompts", p("broken.json"), "--role", "positive", "--out", p("plan.jsonl"), "--mock", "--store",
                   p("store")}),
              4);
}

TEST_F(Cli, GenPromptsRespectsLimitAndLeavesInputUntouched) {
    const auto before = read_file(dir_ / "tree.json");
    ASSERT_EQ(run({"gen-prompts", p("tree.json"), "--role", "positive", "--limit", "5", "--out", p("plan.jsonl"),
                   "--mock", "--store", p("store"), "--seed", "3"}),
              0);
    EXPECT_EQ(read_file(dir_ / "tree.json"), before);
    const auto plan = prompt_plan_from_jsonl(read_file(dir_ / "plan.jsonl"));
    EXPECT_EQ(plan.size(), 5u);
    const auto first = read_file(dir_ / "plan.jsonl");
    ASSERT_EQ(run({"gen-prompts", p("tree.json"), "--role", "positive", "--limit", "5", "--out", p("plan.jsonl"),
                   "--mock", "--store", p("store"), "--seed", "3"}),
              0);
    EXPECT_EQ(read_file(dir_ / "plan.jsonl"), first);
}

// One mock pipeline run shared by the tests below.
class Pipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(testing::scratch_dir("cli_pipeline"));
        run_ = new testing::PipelineRun(testing::run_mock_pipeline(*dir_));
    }
    static void TearDownTestSuite() {
        fs::remove_all(*dir_);
        delete run_;
        delete dir_;
    }

    static fs::path* dir_;
    static testing::PipelineRun* run_;
};

fs::path* Pipeline::dir_ = nullptr;
testing::PipelineRun* Pipeline::run_ = nullptr;

TEST_F(Pipeline, EveryStepSucceedsAndCountsMatchThePlan) {
    for (const auto& [name, code] : run_->steps) {
        EXPECT_EQ(code, 0) << name;
    }
    ASSERT_TRUE(run_->ok) << run_->log;
    const auto m = read_manifest(run_->manifest);
    EXPECT_EQ(m.counts, run_->expected_counts);
    for (const auto& e : m.entries) {
        if (e.role != EntryRole::UserPositive) {
            EXPECT_EQ(e.kept, true);
        }
        EXPECT_EQ(e.instruction_pairs.size(), 2u);
    }
}

TEST_F(Pipeline, FilterUsesRoleDefaultThreshold) {
    for (const auto& line : report_from_jsonl(read_file(*dir_ / "reports/pos.jsonl"))) {
        EXPECT_EQ(line.threshold, 0.3);
        EXPECT_EQ(line.kept, *line.pcs > 0.3);
    }
    for (const auto& line : report_from_jsonl(read_file(*dir_ / "reports/hard_add1.jsonl"))) {
        EXPECT_EQ(line.threshold, 0.1);
    }
    for (const auto& line : report_from_jsonl(read_file(*dir_ / "reports/easy.jsonl"))) {
        EXPECT_EQ(line.threshold, 0.2);
        EXPECT_FALSE(line.pcs.has_value());
    }
}

TEST_F(Pipeline, TauOverrideAndReportTables) {
    const std::string samples = (*dir_ / "samples/pos.jsonl").string();
    const std::string report = (*dir_ / "override.jsonl").string();
    const auto store = (*dir_ / "store").string();
    ASSERT_EQ(run({"filter", samples, "--role", "positive", "--tau", "-1", "--references", (*dir_ / "user").string(),
                   "--report", report, "--mock", "--store", store, "--seed", "7"}),
              0);
    for (const auto& line : report_from_jsonl(read_file(report))) {
        EXPECT_EQ(line.threshold, -1.0);
        EXPECT_TRUE(line.kept);
    }
    fs::remove(report);
    const auto table = read_file(*dir_ / "tables" / "bands.txt");
    EXPECT_EQ(table.substr(0, table.find('\n')).find("Role"), 0u);
    EXPECT_NE(table.find("0.1-0.3"), std::string::npos);
}

TEST_F(Pipeline, DiversityTableFromSampleLists) {
    const auto out = (*dir_ / "div.jsonl").string();
    const auto table = (*dir_ / "div.txt").string();
    ASSERT_EQ(run({"diversity", (*dir_ / "samples/hard_add1.jsonl").string(),
                   (*dir_ / "samples/hard_remove1.jsonl").string(), "--k", "2", "--out", out, "--table", table,
                   "--category", "Add:1", "--category", "Remove:1", "--mock", "--store", (*dir_ / "store").string()}),
              0);
    const auto text = read_file(table);
    EXPECT_EQ(text.substr(0, text.find('\n')), "Category  Times  Diversity");
    EXPECT_NE(text.find("\nAdd "), std::string::npos);
    fs::remove(out);
    fs::remove(table);
}

TEST(Reproducibility, SameSeedGivesByteIdenticalArtifacts) {
    const auto a = testing::scratch_dir("cli_repro_a");
    const auto b = testing::scratch_dir("cli_repro_b");
    const auto ra = testing::run_mock_pipeline(a);
    const auto rb = testing::run_mock_pipeline(b);
    ASSERT_TRUE(ra.ok && rb.ok);
    const auto sa = testing::snapshot(a);
    const auto sb = testing::snapshot(b);
    ASSERT_EQ(sa.size(), sb.size());
    for (const auto& [path, bytes] : sa) {
        ASSERT_TRUE(sb.count(path)) << path;
        EXPECT_TRUE(bytes == sb.at(path)) << path;
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

} // namespace
} // namespace catsynth
