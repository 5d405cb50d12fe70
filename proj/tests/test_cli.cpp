// Runs the chanest_bench executable end to end.

#include <chanest/sweep.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("chanest_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Outcome run(const std::string& args, const std::string& env = "") const
    {
        const auto out = dir_ / "stdout.txt";
        const auto err = dir_ / "stderr.txt";
        const std::string cmd = env + " \"" CHANEST_BENCH_PATH "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                                err.string() + "\"";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    fs::path write(const std::string& name, const std::string& text) const
    {
        const auto p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir_;
};

std::string config(const std::string& name) { return std::string(CHANEST_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST_F(Cli, PresetsListsEight)
{
    const auto r = run("presets");
    EXPECT_EQ(r.code, 0);
    int lines = 0;
    std::istringstream in(r.out);
    for (std::string l; std::getline(in, l);)
        if (l.rfind("fig", 0) == 0)
            ++lines;
    EXPECT_EQ(lines, 8);
    EXPECT_NE(r.out.find("fig3"), std::string::npos);

    const auto shown = run("presets --show");
    EXPECT_EQ(shown.code, 0);
    EXPECT_NE(shown.out.find("[scenario]"), std::string::npos);
}

TEST_F(Cli, RunClosedFormConfigWritesParsableCsv)
{
    const auto csv = dir_ / "out.csv";
    const auto r = run("run --spec \"" + config("closed_form_sweep.cfg") + "\" --out \"" + csv.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = chanest::parse_csv(slurp(csv));
    EXPECT_EQ(rows.size(), 7u * 5u * 2u);
}

TEST_F(Cli, KnownChannelConfigRuns)
{
    const auto r = run("run --spec \"" + config("known_channel.cfg") + "\" --out -");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(chanest::parse_csv(r.out).size(), 11u * 3u * 3u);
}

TEST_F(Cli, SeedAndThreadsOverridesAreDeterministic)
{
    const std::string base = "run --spec \"" + config("monte_carlo_sweep.cfg") + "\" --trials 3000 --out -";
    const auto a = run(base + " --seed 5 --threads 1");
    const auto b = run(base + " --seed 5 --threads 3");
    const auto c = run(base + " --seed 6", "CHANEST_THREADS=2");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, c.out);
    for (const auto& row : chanest::parse_csv(a.out))
        EXPECT_EQ(row.n_trials, 3000u);
}

TEST_F(Cli, PresetSubcommandHonoursTrials)
{
    const auto r = run("preset fig5 --trials 500 --out -");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = chanest::parse_csv(r.out);
    EXPECT_EQ(rows.size(), 16u * 4u);
    EXPECT_EQ(rows.front().n_trials, 500u);
}

TEST_F(Cli, ConfigErrorsExitTwo)
{
    const auto missing = write("missing.cfg", "[scenario]\ntraining_snr_db = 0\n[sweep]\nsnr_db = 0\n"
                                              "estimators = mvu\nmetrics = mse_x_rc\n");
    const auto r = run("run --spec \"" + missing.string() + "\" --out -");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("'B'"), std::string::npos) << r.err;

    const auto unknown = write("unknown.cfg", "[scenario]\nB = 2\nfoo = 1\n");
    const auto u = run("run --spec \"" + unknown.string() + "\" --out -");
    EXPECT_EQ(u.code, 2);
    EXPECT_NE(u.err.find("line 3"), std::string::npos) << u.err;

    EXPECT_EQ(run("preset fig42 --out -").code, 2);
    EXPECT_EQ(run("run --spec /nonexistent.cfg --out -").code, 2);
}

TEST_F(Cli, NumericalErrorsExitThree)
{
    // An SNR this large overflows to an infinite linear ratio and a zero noise power.
    const auto bad = write("overflow.cfg", "[scenario]\ntraining_snr_db = 0\nB = 2\n[sweep]\nsnr_db = 4000\n"
                                           "estimators = mvu\nmetrics = mse_x_rc\n");
    const auto r = run("run --spec \"" + bad.string() + "\" --out -");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("numerical error"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrorsAreNonzero)
{
    EXPECT_NE(run("").code, 0);
    EXPECT_NE(run("run --out -").code, 0);
    EXPECT_NE(run("frobnicate").code, 0);
}
