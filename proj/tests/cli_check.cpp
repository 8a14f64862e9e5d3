// Exercises the installed CLI end to end: exit codes, output schemas, and the
// manifest replay guarantee (re-running a manifest reproduces every CSV byte
// for byte). Takes the fedsched binary path as argv[1].

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
    if (ok) {
        std::cout << "[ok] " << what << "\n";
    } else {
        ++failures;
        std::cout << "[FAIL] " << what << "\n";
    }
}

int run(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    if (rc < 0) return -1;
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: fedsched_cli_check <path-to-fedsched>\n";
        return 2;
    }
    const std::string bin = argv[1];
    const fs::path work = fs::temp_directory_path() / "fedsched_cli_check";
    fs::remove_all(work);
    fs::create_directories(work);

    // config with a generative fleet and a small simulation
    const fs::path cfg = work / "config.json";
    {
        std::ofstream out(cfg);
        out << R"({
  "system": {"total_bandwidth_hz": 20e6, "noise_density": 5e-20, "loss_rate": 0.2},
  "fleet": {"num_clients": 12, "var": 0.3},
  "constants": {"smoothness": 4.0, "pl_constant": 1.0, "stochastic_coeff": 2.0,
                 "bound_ratio": 100.0, "init_gradient_ratio": 4.0, "noniid_metric": 2.0},
  "target_loss": 0.5,
  "hyper": {"participants": 4, "local_epochs": 10, "el_max": 30},
  "sim": {"dimension": 6, "skew": 0.6, "max_epochs": 25, "replicas": 3}
})";
    }

    // exit code contract
    check(run(bin + " predict --config " + cfg.string() + " --out " + (work / "p1").string() +
              " --K 2,5,10 --El 20 --gamma 0,0.3 > /dev/null") == 0,
          "predict exits 0");
    check(run(bin + " predict --config /nonexistent.json --out " + (work / "px").string() +
              " 2> /dev/null") == 2,
          "missing config exits 2");
    check(run(bin + " sweep --config " + cfg.string() + " --out " + (work / "sx").string() +
              " --axis bogus --values 1 2> /dev/null") == 2,
          "bad axis exits 2");

    check(first_line(work / "p1" / "predict.csv") == "K,El,gamma,D,g_epsilon",
          "predict.csv header matches the documented schema");

    // determinism: identical invocations produce identical bytes
    const std::string sim_cmd = " simulate --config " + cfg.string() + " --seed 7 --K 4 --El 5" +
                                " --replicas 3";
    check(run(bin + sim_cmd + " --out " + (work / "s1").string() + " > /dev/null") == 0,
          "simulate exits 0");
    check(run(bin + sim_cmd + " --out " + (work / "s2").string() + " > /dev/null") == 0,
          "simulate re-run exits 0");
    bool identical = true;
    for (const auto& entry : fs::directory_iterator(work / "s1")) {
        const auto name = entry.path().filename();
        if (!same_bytes(entry.path(), work / "s2" / name)) {
            identical = false;
            std::cout << "  differs: " << name << "\n";
        }
    }
    check(identical, "repeated simulate runs are bit-identical");

    // thread count must not change any output byte
    check(run("FEDSCHED_THREADS=1 " + bin + sim_cmd + " --out " + (work / "s1t").string() +
              " > /dev/null") == 0,
          "single-threaded simulate exits 0");
    identical = true;
    for (const auto& entry : fs::directory_iterator(work / "s1")) {
        const auto name = entry.path().filename();
        if (!same_bytes(entry.path(), work / "s1t" / name)) identical = false;
    }
    check(identical, "results are independent of FEDSCHED_THREADS");

    // manifest replay reproduces the outputs
    check(run(bin + " replay " + (work / "s1" / "manifest.json").string() + " --out " +
              (work / "s3").string() + " > /dev/null") == 0,
          "replay exits 0");
    identical = true;
    for (const auto& entry : fs::directory_iterator(work / "s1")) {
        const auto name = entry.path().filename();
        if (name == "manifest.json") continue;  // replay rewrites it, contents-equal JSON
        if (!same_bytes(entry.path(), work / "s3" / name)) {
            identical = false;
            std::cout << "  differs: " << name << "\n";
        }
    }
    check(identical, "manifest replay reproduces all CSVs bit-identically");

    // schedule + kkt outputs
    check(run(bin + " schedule --config " + cfg.string() + " --seed 3 --K 5 --El 10 --out " +
              (work / "sch").string() + " > /dev/null") == 0,
          "schedule exits 0");
    check(first_line(work / "sch" / "schedule.csv") == "round,client,a_j,f_j,t_u,t_n,e_u,e_n",
          "schedule.csv header matches the documented schema");
    check(fs::exists(work / "sch" / "kkt.csv"), "kkt report written");

    // optimize writes the surface and a recommendation
    check(run(bin + " optimize --config " + cfg.string() + " --out " + (work / "opt").string() +
              " > /dev/null") == 0,
          "optimize exits 0");
    check(fs::exists(work / "opt" / "surface.csv") &&
              fs::exists(work / "opt" / "recommendation.json"),
          "optimize outputs present");

    // sweep K analytic is the predict restriction at the config's El and
    // loss rate: formatted values must agree byte for byte
    check(run(bin + " sweep --config " + cfg.string() + " --axis K --values 2,5,10" +
              " --mode analytic --out " + (work / "swk").string() + " > /dev/null") == 0,
          "sweep exits 0");
    check(run(bin + " predict --config " + cfg.string() + " --K 2,5,10 --El 10 --gamma 0.2" +
              " --epsilon 0.5 --out " + (work / "pref").string() + " > /dev/null") == 0,
          "reference predict exits 0");
    {
        std::ifstream sw(work / "swk" / "sweep.csv");
        std::ifstream pr(work / "pref" / "predict.csv");
        std::string line;
        std::getline(sw, line);  // headers
        std::vector<std::string> sweep_vals;
        while (std::getline(sw, line)) {
            sweep_vals.push_back(line.substr(line.rfind(',') + 1));
        }
        std::getline(pr, line);
        std::vector<std::string> predict_vals;
        while (std::getline(pr, line)) {
            predict_vals.push_back(line.substr(line.rfind(',') + 1));
        }
        check(sweep_vals.size() == 3 && sweep_vals == predict_vals,
              "sweep K analytic equals the predict restriction");
    }

    // candidate pruning flows through optimize
    const fs::path pruned_cfg = work / "pruned.json";
    {
        std::ofstream out(pruned_cfg);
        out << R"({
  "fleet": {"num_clients": 12, "var": 0.3},
  "prune": {"enabled": true, "rate_percentile": 0.2, "data_percentile": 0.0},
  "hyper": {"participants": 4, "local_epochs": 10, "el_max": 20}
})";
    }
    check(run(bin + " optimize --config " + pruned_cfg.string() + " --seed 5 --out " +
              (work / "optp").string() + " > /dev/null") == 0,
          "optimize with pruning exits 0");
    {
        std::ifstream rec(work / "optp" / "recommendation.json");
        std::ostringstream ss;
        ss << rec.rdbuf();
        check(ss.str().find("\"pruned_fleet_size\": 10") != std::string::npos,
              "bottom-percentile clients are pruned from the candidate set");
    }

    // cost-ratio sweep: the recommended participation grows with the ratio
    check(run(bin + " sweep --config " + cfg.string() + " --axis cost_ratio" +
              " --values 1,4,16,64 --mode analytic --out " + (work / "swr").string() +
              " > /dev/null") == 0,
          "cost_ratio sweep exits 0");
    {
        std::ifstream sw(work / "swr" / "sweep.csv");
        std::string line;
        std::getline(sw, line);
        std::vector<double> k_star;
        while (std::getline(sw, line)) {
            std::istringstream ss(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ss, field, ',')) fields.push_back(field);
            if (fields[3] == "k_star") k_star.push_back(std::stod(fields[4]));
        }
        bool increasing = k_star.size() == 4;
        for (std::size_t i = 1; i < k_star.size(); ++i) {
            increasing = increasing && k_star[i] > k_star[i - 1];
        }
        check(increasing, "k_star column increases with the cost ratio");
    }

    // Var sweep writes paired policy costs per replicate
    check(run(bin + " sweep --config " + cfg.string() + " --axis Var --values 0.1,0.5" +
              " --mode simulated --epochs 10 --replicas 3 --out " + (work / "swv").string() +
              " > /dev/null") == 0,
          "Var sweep exits 0");
    {
        std::ifstream sw(work / "swv" / "sweep.csv");
        std::string line;
        std::getline(sw, line);
        int proposed = 0, even = 0;
        while (std::getline(sw, line)) {
            if (line.find("cost_proposed") != std::string::npos) ++proposed;
            if (line.find("cost_even") != std::string::npos) ++even;
        }
        check(proposed == 6 && even == 6, "Var sweep emits one row per policy and replicate");
    }

    std::cout << (failures == 0 ? "CLI CHECK PASSED\n" : "CLI CHECK FAILED\n");
    return failures == 0 ? 0 : 1;
}
