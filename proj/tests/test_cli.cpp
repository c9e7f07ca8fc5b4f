// Exercises the gpff binary end to end: argv[1] is the CLI path.
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAILED", what.c_str());
    if (!ok) ++failures;
}

int run(const std::string& command) {
    const int status = std::system(command.c_str());
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -2;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

int line_count(const std::string& text) {
    int lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    return lines;
}

const char* kConfig = R"([plant]
kind = spatial_mass
nominal_mass = 1.0
sample_time = 0.001
noise_std = 1e-5

[trajectory]
start = 0.0
end = 0.01
duration = 0.04

[ilc]
trials = 3
basis = acceleration

[gp]
restarts = 2
max_iterations = 60

[positions]
training = 0.1, 0.4, 0.7, 1.0
test = 0.25, 0.85
prediction_grid = 9

[output]
dir = OUTDIR
)";

std::string write_config(const fs::path& dir, const std::string& out_dir,
                         const std::string& extra = "", std::string text = kConfig) {
    const auto pos = text.find("OUTDIR");
    text.replace(pos, 6, out_dir);
    text += extra;
    const fs::path path = dir / "experiment.cfg";
    std::ofstream out(path);
    out << text;
    return path.string();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: test_cli <path-to-gpff-binary>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path work = fs::temp_directory_path() / "gpff_cli_test";
    fs::remove_all(work);
    fs::create_directories(work);

    // missing config: exit code 2 and the path in the message
    {
        const std::string missing = (work / "absent.cfg").string();
        const std::string log = (work / "stderr.txt").string();
        const int code = run(cli + " ilc --config " + missing + " 2> " + log);
        check(code == 2, "missing config exits with code 2");
        check(slurp(log).find(missing) != std::string::npos, "missing config names the path");
    }

    // unknown config key: exit code 2
    {
        const std::string cfg =
            write_config(work, (work / "out_badkey").string(), "\n[gp]\nx_unknown = 1\n");
        const int code = run(cli + " collect --config " + cfg + " > /dev/null 2>&1");
        check(code == 2, "unknown config key exits with code 2");
    }

    // ilc: session CSV with trials+1 rows, deterministic across runs
    {
        const std::string out1 = (work / "out_ilc1").string();
        const std::string out2 = (work / "out_ilc2").string();
        const std::string cfg = write_config(work, out1);
        int code = run(cli + " ilc --config " + cfg + " --position 0.5 > /dev/null");
        check(code == 0, "ilc succeeds");
        const std::string csv1 = slurp(out1 + "/ilc_session.csv");
        check(line_count(csv1) == 1 + 3 + 1, "ilc CSV has header + trials+1 rows");

        code = run(cli + " ilc --config " + cfg + " --position 0.5 --out-dir " + out2 +
                   " > /dev/null");
        check(code == 0, "second ilc run succeeds");
        check(csv1 == slurp(out2 + "/ilc_session.csv"), "seeded ilc runs are byte-identical");
    }

    // position outside the domain: config error
    {
        const std::string cfg = write_config(work, (work / "out_dom").string());
        const int code = run(cli + " ilc --config " + cfg + " --position 1.5 > /dev/null 2>&1");
        check(code == 2, "out-of-domain position exits with code 2");
    }

    // full evaluate: summary has methods x test positions; --methods drops a column
    {
        const std::string out = (work / "out_eval").string();
        const std::string cfg = write_config(work, out);
        int code = run(cli + " evaluate --config " + cfg + " > /dev/null");
        check(code == 0, "evaluate succeeds");
        const std::string summary = slurp(out + "/summary.csv");
        check(line_count(summary) == 1 + 3 * 2, "summary has one row per method and position");
        check(summary.find("local_ilc") != std::string::npos, "summary includes local_ilc");
        check(fs::exists(out + "/report.json"), "report.json written");
        check(fs::exists(out + "/gp_model_theta_1.json"), "model file written");
        check(fs::exists(out + "/gp_grid.csv"), "grid CSV written");

        const std::string out_sub = (work / "out_eval_sub").string();
        code = run(cli + " evaluate --config " + cfg + " --out-dir " + out_sub +
                   " --methods center,gp > /dev/null");
        check(code == 0, "evaluate with a method subset succeeds");
        const std::string subset = slurp(out_sub + "/summary.csv");
        check(line_count(subset) == 1 + 2 * 2, "subset summary has two methods per position");
        check(subset.find("local_ilc") == std::string::npos, "local_ilc column absent");
    }

    // stage caching: rerunning evaluate reuses collect, --stage stops early
    {
        const std::string out = (work / "out_stage").string();
        const std::string cfg = write_config(work, out);
        int code = run(cli + " evaluate --config " + cfg + " --stage collect > /dev/null");
        check(code == 0, "evaluate --stage collect succeeds");
        check(fs::exists(out + "/training_data.csv"), "collect stage wrote training data");
        check(!fs::exists(out + "/summary.csv"), "evaluation outputs absent after early stop");
        const auto mtime = fs::last_write_time(out + "/training_data.csv");
        code = run(cli + " evaluate --config " + cfg + " > /dev/null");
        check(code == 0, "full evaluate succeeds after staged run");
        check(fs::last_write_time(out + "/training_data.csv") == mtime,
              "cached collect stage was not recomputed");
    }

    // fit: one model file per parameter, the wire-bonder-style 2-axis basis
    // yields theta_1..theta_5; predict writes one row per test position
    {
        const std::string out = (work / "out_fit2").string();
        const std::string cfg2 = (work / "periodic.cfg").string();
        {
            std::ofstream cfgout(cfg2);
            cfgout << "[plant]\nkind = periodic_flux\nnoise_std = 1e-6\nsample_time = 0.001\n"
                   << "[trajectory]\nend = 0.01 0.01\nduration = 0.04\n"
                   << "[ilc]\ntrials = 2\nbasis1 = velocity, acceleration\n"
                   << "basis2 = velocity, acceleration, sign_velocity\n"
                   << "[gp]\nrestarts = 2\nmax_iterations = 40\n"
                   << "[positions]\ntraining = 0 0.5; 0.25 0.5; 0.5 0.5; 0.75 0.5; 1 0.5\n"
                   << "test = 0.3 0.5; 0.6 0.5\nprediction_grid = 3\n"
                   << "[output]\ndir = " << out << "\n";
        }
        int code = run(cli + " fit --config " + cfg2 + " > /dev/null");
        check(code == 0, "fit succeeds on the 2-axis config");
        int models = 0;
        for (int i = 1; i <= 5; ++i)
            if (fs::exists(out + "/gp_model_theta_" + std::to_string(i) + ".json")) ++models;
        check(models == 5, "fit writes five model files for the five parameters");
        check(!fs::exists(out + "/gp_model_theta_6.json"), "no spurious sixth model");

        code = run(cli + " predict --config " + cfg2 + " > /dev/null");
        check(code == 0, "predict succeeds");
        check(line_count(slurp(out + "/predictions.csv")) == 1 + 2,
              "predictions cover each test position");
    }

    // simulate: time series with r,y,e,u,f per axis
    {
        const std::string out = (work / "out_sim").string();
        const std::string cfg = write_config(work, out);
        const int code = run(cli + " simulate --config " + cfg + " --position 0.4 > /dev/null");
        check(code == 0, "simulate succeeds");
        const std::string csv = slurp(out + "/simulate.csv");
        check(csv.find("k,t,r0,y0,e0,u0,f0") == 0, "simulate CSV carries the loop signals");
    }

    // unstable loop: exit code 4
    {
        const std::string cfg = write_config(work, (work / "out_unstable").string(),
                                             "\n[controller]\ndamping_ratio = -0.7\n");
        const int code = run(cli + " simulate --config " + cfg + " > /dev/null 2>&1");
        check(code == 4, "unstable closed loop exits with code 4");
    }

    // singular update law: exit code 3
    {
        std::string text = kConfig;
        const auto pos = text.find("basis = acceleration");
        text.replace(pos, std::string("basis = acceleration").size(),
                     "basis = acceleration, acceleration\nw_f = 0\nw_df = 0");
        const std::string cfg = write_config(work, (work / "out_singular").string(), "", text);
        const int code = run(cli + " ilc --config " + cfg + " > /dev/null 2>&1");
        check(code == 3, "singular update law exits with code 3");
    }

    std::printf("%s\n", failures == 0 ? "all CLI checks passed" : "CLI checks FAILED");
    return failures == 0 ? 0 : 1;
}
