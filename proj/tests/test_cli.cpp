#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fasttd3/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
    const std::string out_path =
        (fs::temp_directory_path() / ("ftd3_cli_out_" + std::to_string(::getpid()) + ".txt")).string();
    const std::string cmd = std::string(FASTTD3_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    CmdResult res;
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_path);
    std::stringstream ss;
    ss << in.rdbuf();
    res.output = ss.str();
    fs::remove(out_path);
    return res;
}

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("train with zero steps writes a header-only metrics file", "[cli]") {
    const std::string log = temp_path("ftd3_cli_zero.jsonl");
    const CmdResult res =
        run_cli("train --task pointmass2d --total-steps 0 --log " + log);
    REQUIRE(res.exit_code == 0);
    std::ifstream in(log);
    std::string line;
    int lines = 0;
    std::string first;
    while (std::getline(in, line))
        if (!line.empty()) {
            if (lines == 0) first = line;
            ++lines;
        }
    REQUIRE(lines == 1);
    REQUIRE(nlohmann::json::parse(first).contains("config"));
    fs::remove(log);
}

TEST_CASE("bad enum values exit 2 and list the valid set", "[cli]") {
    const CmdResult res = run_cli("train --task pointmass2d --total-steps 0 --cdq minimum");
    REQUIRE(res.exit_code == 2);
    REQUIRE(res.output.find("min") != std::string::npos);
    REQUIRE(res.output.find("avg") != std::string::npos);
}

TEST_CASE("unknown flags exit 2", "[cli]") {
    const CmdResult res = run_cli("train --task pointmass2d --no-such-flag 1");
    REQUIRE(res.exit_code == 2);
}

TEST_CASE("unknown task and unknown reward term exit 2 with names", "[cli]") {
    const CmdResult bad_task = run_cli("train --task nosuch --total-steps 0");
    REQUIRE(bad_task.exit_code == 2);
    REQUIRE(bad_task.output.find("nosuch") != std::string::npos);

    const CmdResult bad_weight =
        run_cli("train --task pointmass2d --total-steps 0 --reward-weight w_nope=1");
    REQUIRE(bad_weight.exit_code == 2);
    REQUIRE(bad_weight.output.find("w_nope") != std::string::npos);
    REQUIRE(bad_weight.output.find("w_ctrl") != std::string::npos);
}

TEST_CASE("missing config file and unwritable log exit 2", "[cli]") {
    REQUIRE(run_cli("train --config /nonexistent/x.cfg --total-steps 0").exit_code == 2);
    REQUIRE(run_cli("train --task pointmass2d --total-steps 0 --log /nonexistent/dir/x.jsonl")
                .exit_code == 2);
}

TEST_CASE("paper-scale preset echoes batch size 32768 in the header", "[cli]") {
    const std::string log = temp_path("ftd3_cli_paper.jsonl");
    const CmdResult res =
        run_cli("train --task pointmass2d --total-steps 0 --paper-scale --log " + log);
    REQUIRE(res.exit_code == 0);
    const auto file = fasttd3::read_metrics(log);
    REQUIRE(file.config["batch_size"] == 32768);
    fs::remove(log);
}

TEST_CASE("config precedence is CLI over file over defaults", "[cli]") {
    const std::string cfg = temp_path("ftd3_cli_prec.cfg");
    {
        std::ofstream out(cfg);
        out << "batch_size = 1024\nutd = 4\n";
    }
    const std::string log = temp_path("ftd3_cli_prec.jsonl");
    const CmdResult res = run_cli("train --task pointmass2d --total-steps 0 --config " + cfg +
                                  " --batch-size 2048 --log " + log);
    REQUIRE(res.exit_code == 0);
    const auto file = fasttd3::read_metrics(log);
    REQUIRE(file.config["batch_size"] == 2048);  // flag wins
    REQUIRE(file.config["utd"] == 4);            // file wins over default
    REQUIRE(file.config["policy_delay"] == 2);   // default
    fs::remove(cfg);
    fs::remove(log);
}

TEST_CASE("train/eval round trip reproduces the trainer's last eval", "[cli]") {
    const std::string log = temp_path("ftd3_cli_train.jsonl");
    const std::string ck = temp_path("ftd3_cli_train.ftd3");
    const CmdResult tr = run_cli(
        "train --task pointmass2d --num-envs 8 --total-steps 512 --batch-size 32 "
        "--num-atoms 11 --seed 9 --eval-every 256 --eval-episodes 3 "
        "--log " + log + " --checkpoint " + ck + " --config /dev/null");
    INFO(tr.output);
    REQUIRE(tr.exit_code == 0);
    const auto file = fasttd3::read_metrics(log);
    REQUIRE_FALSE(file.rows.empty());
    const double last_eval = file.rows.back().eval_return_mean;

    // width_mult defaults to 1.0 in eval; the checkpoint encodes the layer
    // sizes, so no width flag is needed
    const CmdResult ev = run_cli("eval --checkpoint " + ck +
                                 " --task pointmass2d --episodes 3 --seed 9");
    INFO(ev.output);
    REQUIRE(ev.exit_code == 0);
    const auto j = nlohmann::json::parse(ev.output);
    REQUIRE(j["eval_return_mean"].get<double>() == Catch::Approx(last_eval).margin(1e-9));
    fs::remove(log);
    fs::remove(ck);
}

TEST_CASE("eval failure modes exit 2", "[cli]") {
    REQUIRE(run_cli("eval --checkpoint /nonexistent.ftd3 --task pointmass2d").exit_code == 2);

    // truncated checkpoint
    const std::string log = temp_path("ftd3_cli_t.jsonl");
    const std::string ck = temp_path("ftd3_cli_t.ftd3");
    REQUIRE(run_cli("train --task pendulum --num-envs 4 --total-steps 64 --batch-size 16 "
                    "--num-atoms 11 --checkpoint " + ck + " --log " + log + " --config /dev/null")
                .exit_code == 0);
    const auto size = fs::file_size(ck);
    fs::resize_file(ck, size / 2);
    const CmdResult cut = run_cli("eval --checkpoint " + ck + " --task pendulum");
    REQUIRE(cut.exit_code == 2);
    REQUIRE(cut.output.find("unexpected end of file") != std::string::npos);
    fs::remove(ck);

    // dim mismatch: pendulum checkpoint against pointmass2d
    const std::string ck2 = temp_path("ftd3_cli_t2.ftd3");
    REQUIRE(run_cli("train --task pendulum --num-envs 4 --total-steps 64 --batch-size 16 "
                    "--num-atoms 11 --checkpoint " + ck2 + " --log " + log + " --config /dev/null")
                .exit_code == 0);
    const CmdResult mism = run_cli("eval --checkpoint " + ck2 + " --task pointmass2d");
    REQUIRE(mism.exit_code == 2);
    REQUIRE(mism.output.find("obs_dim") != std::string::npos);
    fs::remove(ck2);
    fs::remove(log);
}

TEST_CASE("a killed training run leaves a parseable metrics file", "[cli]") {
    const std::string log = temp_path("ftd3_cli_kill.jsonl");
    // SIGKILL after 3 seconds, well inside a multi-minute run
    const std::string cmd = std::string("timeout -s KILL 3 ") + FASTTD3_CLI_PATH +
                            " train --task pointmass2d --num-envs 32 --total-steps 200000 "
                            "--batch-size 128 --eval-every 500 --log " + log +
                            " --config /dev/null > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    (void)status;  // killed by design
    REQUIRE(fs::exists(log));
    const auto file = fasttd3::read_metrics(log);  // parses despite the kill
    REQUIRE(file.config.contains("batch_size"));
    fs::remove(log);
}

TEST_CASE("bench on a tiny budget writes per-cell metrics and a summary", "[cli]") {
    const std::string out_dir = temp_path("ftd3_cli_bench");
    fs::remove_all(out_dir);
    const CmdResult res = run_cli("bench --axis cdq --task pointmass2d --seeds 1 "
                                  "--total-steps 2000 --out " + out_dir);
    INFO(res.output);
    REQUIRE(res.exit_code == 0);
    // 2 cells x 1 seed
    int metrics_files = 0;
    for (const auto& entry : fs::directory_iterator(out_dir))
        if (entry.path().extension() == ".jsonl") metrics_files += 1;
    REQUIRE(metrics_files == 2);
    REQUIRE(fs::exists(out_dir + "/summary.json"));
    std::ifstream in(out_dir + "/summary.json");
    const auto summary = nlohmann::json::parse(in);
    REQUIRE(summary.size() == 2);
    REQUIRE(summary[0]["cell"] == "cdq=min");
    REQUIRE(summary[1]["cell"] == "cdq=avg");
    REQUIRE(res.output.find("cdq=min") != std::string::npos);
    fs::remove_all(out_dir);
}

TEST_CASE("bench rejects unknown axes", "[cli]") {
    const CmdResult res = run_cli("bench --axis nosuch --task pointmass2d --seeds 1");
    REQUIRE(res.exit_code == 2);
    REQUIRE(res.output.find("num_envs") != std::string::npos);
}
