#include "cob/pipeline.hpp"

#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

#include <sys/wait.h>

namespace fs = std::filesystem;
using cob::json;

namespace {

int cob_cli(const std::string& args) {
    std::string cmd = std::string(COB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct CliFixture {
    fs::path dir = fixture::scratch_dir("cli");
    CliFixture() {
        auto data = fixture::synthetic_prices(fixture::two_regime_params(), 260, 11);
        fixture::write_file(dir / "prices.csv", cob::write_price_csv(data.prices));
    }
    std::string p(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli subcommands chain through files", "[cli]") {
    CliFixture f;
    REQUIRE(cob_cli("ingest --input " + f.p("prices.csv") + " --asset SYN --out " + f.p("returns.csv")) == 0);
    auto returns = cob::parse_return_csv(fixture::read_file(f.p("returns.csv")), "SYN", cob::Frequency::weekly);
    CHECK(returns.size() == 260);
    CHECK(fs::exists(f.p("returns.csv.json")));

    const std::string in = " --returns " + f.p("returns.csv") + " --asset SYN";
    REQUIRE(cob_cli("adf" + in + " --out " + f.p("adf.json")) == 0);
    CHECK(json::parse(fixture::read_file(f.p("adf.json"))).contains("p_value"));

    REQUIRE(cob_cli("select" + in + " --k-min 1 --k-max 3 --restarts 5 --out " + f.p("sel.json") + " --table " + f.p("sel.txt")) == 0);
    CHECK(json::parse(fixture::read_file(f.p("sel.json")))["chosen_k"] == 2);
    CHECK(fixture::read_file(f.p("sel.txt")).find('*') != std::string::npos);

    REQUIRE(cob_cli("fit" + in + " --k 2 --restarts 5 --out " + f.p("fit.json")) == 0);
    fixture::write_file(f.p("events.csv"), "start,end,kind,tag\n2001-01-01,2001-06-30,event,spike\n");
    REQUIRE(cob_cli("label" + in + " --fit " + f.p("fit.json") + " --events " + f.p("events.csv") + " --out " +
                    f.p("labels.csv") + " --annotated " + f.p("ann.json")) == 0);
    auto labels = cob::parse_label_csv(fixture::read_file(f.p("labels.csv")));
    CHECK(labels.size() == 260);
    CHECK(json::parse(fixture::read_file(f.p("ann.json")))["events"].size() == 1);

    REQUIRE(cob_cli("evaluate" + in + " --labels " + f.p("labels.csv") + " --seeds 0..2 --out " + f.p("mse.json") +
                    " --csv " + f.p("mse.csv")) == 0);
    CHECK(json::parse(fixture::read_file(f.p("mse.json")))["cells"].size() == 9);
}

TEST_CASE("cli run and plot-data", "[cli]") {
    CliFixture f;
    fixture::write_file(f.p("run.cfg"), "input = " + f.p("prices.csv") + "\nasset_id = SYN\nk_min = 1\nk_max = 3\nrestarts = 5\n");
    REQUIRE(cob_cli("run --config " + f.p("run.cfg") + " --set seeds=0..2 --output-dir " + f.p("out")) == 0);
    CHECK(fs::exists(f.dir / "out" / "run_report.json"));
    fs::remove(f.dir / "out" / "plot_SYN_labels.csv");
    REQUIRE(cob_cli("plot-data --run-dir " + f.p("out")) == 0);
    CHECK(fs::exists(f.dir / "out" / "plot_SYN_labels.csv"));
}

TEST_CASE("cli exit codes identify the failing stage", "[cli]") {
    CliFixture f;
    CHECK(cob_cli("run --set bogus=1 --input " + f.p("prices.csv")) == 2);
    CHECK(cob_cli("run --input " + f.p("nope.csv") + " --output-dir " + f.p("o1")) == 2);
    fixture::write_file(f.p("dup.csv"), "DATE,PRICE\n2000-01-07,1\n2000-01-07,2\n");
    CHECK(cob_cli("run --input " + f.p("dup.csv") + " --output-dir " + f.p("o2")) == 10);
    auto tiny = fixture::synthetic_prices(fixture::two_regime_params(), 12, 1);
    fixture::write_file(f.p("tiny.csv"), cob::write_price_csv(tiny.prices));
    CHECK(cob_cli("run --input " + f.p("tiny.csv") + " --output-dir " + f.p("o3")) == 11);
    CHECK(fs::exists(f.dir / "o3" / "returns.csv.partial"));
    CHECK(cob_cli("adf --returns " + f.p("prices.csv") + " --max-lags x") != 0);
    CHECK(cob_cli("fit") != 0);
}
