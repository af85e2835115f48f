#include <qcdeform/cli.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

using namespace qcdeform;
namespace fs = std::filesystem;

namespace {

const fs::path data_dir = QCDEFORM_TEST_DATA;

class Cli : public ::testing::Test {
  protected:
	void SetUp() override {
		const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
		root = fs::temp_directory_path() / ("qcdeform_cli_" + std::string(info->name()));
		fs::remove_all(root);
		fs::create_directories(root);
	}
	void TearDown() override { fs::remove_all(root); }

	fs::path write_config(const std::string& name, const std::string& text) const {
		const fs::path p = root / name;
		std::ofstream(p) << text;
		return p;
	}

	int run(const std::string& cmd, const fs::path& config, const fs::path& out, std::vector<std::string> extra = {}) {
		std::vector<std::string> args{cmd, "--config", config.string(), "--out", out.string()};
		args.insert(args.end(), extra.begin(), extra.end());
		std::ostringstream err;
		const int code = cli::run_cli(args, err);
		last_error = err.str();
		return code;
	}

	fs::path root;
	std::string last_error;
};

std::string slurp(const fs::path& p) {
	std::ifstream in(p, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

io::json load(const fs::path& p) { return io::read_json_file(p); }

std::set<std::string> keys(const io::json& j) {
	std::set<std::string> k;
	for (const auto& [key, value] : j.items()) k.insert(key);
	return k;
}

double cell(const io::CsvTable& t, std::size_t row, std::size_t col) { return io::parse_double(t.rows[row][col], "cell"); }

} // namespace

TEST_F(Cli, CyclesFixture) {
	ASSERT_EQ(run("cycles", data_dir / "cycles.json", root / "out"), 0) << last_error;
	const auto table = io::read_csv(root / "out" / "cycles.csv", io::cycles_header);
	ASSERT_EQ(table.rows.size(), 4u); // 0, -1 and the two points of the 2-cycle
	const auto summary = load(root / "out" / "cycles_summary.json");
	int usable = 0;
	for (const auto& o : summary["orders"]) usable += o["usable"].get<int>();
	EXPECT_EQ(usable, 2);
	EXPECT_EQ(table.rows[2][6], "repelling");
	EXPECT_NEAR(cell(table, 2, 4), 4.0, 1e-12);
	EXPECT_NO_THROW(io::parse_germ(summary["germ"]));
}

TEST_F(Cli, ConfigErrorsExitTwo) {
	EXPECT_EQ(run("cycles", write_config("bad.json", "{\"germ\": {\"coeffs\": [[2, 0]"), root / "o"), 2);
	EXPECT_EQ(run("cycles", write_config("q0.json", R"({"orders": [0]})"), root / "o"), 2);
	EXPECT_EQ(run("cycles", write_config("extra.json", R"({"germ": {"coeffs": [[2, 0]], "colour": 1}})"), root / "o"), 2);
	EXPECT_EQ(run("cycles", write_config("top.json", R"({"seeds": 3})"), root / "o"), 2);
	EXPECT_EQ(run("deform-local",
	              write_config("unit.json", R"({"germ": {"coeffs": [[2, 0], [1, 0]]},
	                  "deformations": [{"order": 1, "target": [0, 1]}]})"),
	              root / "o"),
	          2);
	EXPECT_EQ(run("cycles", root / "missing.json", root / "o"), 2);
	EXPECT_EQ(cli::run_cli({"cycles"}), 2);
	EXPECT_EQ(cli::run_cli({"frobnicate", "--config", "x"}), 2);
	EXPECT_EQ(run("cycles", data_dir / "cycles.json", root / "o", {"--grid", "3"}), 2);
}

TEST_F(Cli, NumericalFailureExitsThree) {
	// The origin of 0.5 z is attracting: no torus shear exists for it.
	const auto cfg = write_config("attr.json", R"({"germ": {"coeffs": [[0.5, 0]], "radius_U": 1.0},
	    "deformations": [{"order": 1, "target": [3, 0]}]})");
	EXPECT_EQ(run("deform-local", cfg, root / "o"), 3);
	EXPECT_NE(last_error.find("numerical failure"), std::string::npos);
}

TEST_F(Cli, DeformLocalReports) {
	ASSERT_EQ(run("deform-local", data_dir / "deform.json", root / "a"), 0) << last_error;
	const auto report = load(root / "a" / "deform_local.json")["reports"][0];
	EXPECT_NEAR(report["measured_multiplier"][0].get<double>(), 3.0, 1e-5);
	EXPECT_LT(report["holomorphy_residual"].get<double>(), 1e-5);

	const auto same = write_config("same.json", R"({"germ": {"coeffs": [[2, 0], [1, 0]]},
	    "deformations": [{"order": 1, "target": [2, 0]}]})");
	ASSERT_EQ(run("deform-local", same, root / "b"), 0) << last_error;
	const auto r = load(root / "b" / "deform_local.json")["reports"][0];
	EXPECT_NEAR(r["measured_multiplier"][0].get<double>(), 2.0, 1e-10);
	EXPECT_LT(r["holomorphy_residual"].get<double>(), 1e-7);
}

TEST_F(Cli, StraightenEmptyTableIsIdentity) {
	const auto cfg = write_config("empty.json", R"({"germ": {"coeffs": [[2, 0], [1, 0]]}, "solver": {"N": 64}})");
	ASSERT_EQ(run("straighten", cfg, root / "o"), 0) << last_error;
	const auto dump = io::read_gridmap(root / "o" / "gridmap.bin");
	ASSERT_EQ(dump.geometry.N, 64);
	for (int r = 0; r < 64; ++r)
		for (int c = 0; c < 64; ++c)
			EXPECT_LT(std::abs(dump.samples[dump.geometry.index(r, c)] - dump.geometry.node(r, c)), 1e-15);
	const auto side = load(root / "o" / "gridmap.json");
	EXPECT_EQ(side["diagnostics"]["sweeps"].get<int>(), 1);
	EXPECT_TRUE(side["multipliers"].empty());
}

TEST_F(Cli, StraightenFixture) {
	ASSERT_EQ(run("straighten", data_dir / "deform.json", root / "o", {"--grid", "128"}), 0) << last_error;
	const auto side = load(root / "o" / "gridmap.json");
	EXPECT_EQ(side["geometry"]["N"].get<int>(), 128);
	const auto& m = side["multipliers"][0];
	if (m["status"] == "ok") EXPECT_NEAR(m["measured_multiplier"][0].get<double>(), 3.0, 2e-2);
	else EXPECT_TRUE(m["measured_multiplier"].is_null());
	EXPECT_GT(side["diagnostics"]["min_jacobian"].get<double>(), 0.0);
}

TEST_F(Cli, MotionWritesOneFilePerParameter) {
	ASSERT_EQ(run("motion", data_dir / "motion.json", root / "o"), 0) << last_error;
	const auto summary = load(root / "o" / "motion_summary.json");
	EXPECT_LT(summary["max_dbar_t"].get<double>(), 1e-4);
	for (int k = 0; k < 2; ++k) {
		const auto t = io::read_csv(root / "o" / ("motion_" + std::to_string(k) + ".csv"), io::motion_header);
		EXPECT_EQ(t.rows.size(), 25u);
		for (std::size_t r = 0; r < t.rows.size(); ++r) EXPECT_LT(cell(t, r, 4), 1e-4);
	}
	EXPECT_FALSE(fs::exists(root / "o" / "motion_2.csv"));
}

TEST_F(Cli, CremerGoldenNotWitnessed) {
	ASSERT_EQ(run("cremer", data_dir / "golden.json", root / "o"), 0) << last_error;
	const auto report = load(root / "o" / "cremer.json");
	EXPECT_FALSE(report["witnessed"].get<bool>());
	EXPECT_EQ(report["report"].get<std::string>(), "condition not witnessed");
	const auto t = io::read_csv(root / "o" / "cremer.csv", io::cremer_header);
	EXPECT_EQ(t.rows.size(), 39u);
	EXPECT_EQ(t.rows[0][1], "1");
	EXPECT_EQ(t.rows[0][2], ""); // q_2 = 2 < 3
	EXPECT_EQ(t.rows[38][1], "102334155");

	const auto tower = write_config("tower.json", R"({"cremer": {"pattern": "tower", "count": 5}})");
	ASSERT_EQ(run("cremer", tower, root / "t"), 0) << last_error;
	EXPECT_TRUE(load(root / "t" / "cremer.json")["witnessed"].get<bool>());
}

TEST_F(Cli, RenderRasters) {
	ASSERT_EQ(run("render", data_dir / "render.json", root / "o"), 0) << last_error;
	const auto mu = io::read_ppm(root / "o" / "mu.ppm");
	EXPECT_EQ(mu.width, 96);
	EXPECT_EQ(*std::max_element(mu.rgb.begin(), mu.rgb.end()), 255);
	const auto mesh = io::read_ppm(root / "o" / "mesh.ppm");
	EXPECT_EQ(*std::min_element(mesh.rgb.begin(), mesh.rgb.end()), 0);
	const auto t = io::read_csv(root / "o" / "mu.csv", io::mu_header);
	EXPECT_EQ(t.rows.size(), 96u * 96u);
}

TEST_F(Cli, DeterministicOutputs) {
	const std::vector<std::pair<std::string, fs::path>> runs{{"cycles", data_dir / "cycles.json"},
	                                                         {"koenigs", data_dir / "deform.json"},
	                                                         {"deform-local", data_dir / "deform.json"},
	                                                         {"motion", data_dir / "motion.json"},
	                                                         {"cremer", data_dir / "golden.json"},
	                                                         {"render", data_dir / "render.json"}};
	for (const auto& [cmd, cfg] : runs) {
		ASSERT_EQ(run(cmd, cfg, root / "a"), 0) << cmd << ": " << last_error;
		ASSERT_EQ(run(cmd, cfg, root / "b"), 0) << cmd << ": " << last_error;
	}
	ASSERT_EQ(run("straighten", data_dir / "deform.json", root / "a", {"--grid", "64"}), 0);
	ASSERT_EQ(run("straighten", data_dir / "deform.json", root / "b", {"--grid", "64"}), 0);
	std::size_t files = 0;
	for (const auto& entry : fs::directory_iterator(root / "a")) {
		const auto name = entry.path().filename();
		ASSERT_TRUE(fs::exists(root / "b" / name)) << name;
		EXPECT_EQ(slurp(entry.path()), slurp(root / "b" / name)) << name;
		++files;
	}
	EXPECT_EQ(files, 14u);
}

TEST_F(Cli, OutputsReparse) {
	ASSERT_EQ(run("koenigs", data_dir / "deform.json", root / "o"), 0);
	ASSERT_EQ(run("straighten", data_dir / "deform.json", root / "o", {"--grid", "64"}), 0);
	const auto charts = load(root / "o" / "charts.json");
	ASSERT_EQ(charts["charts"].size(), 1u);
	EXPECT_EQ(keys(charts["charts"][0]), (std::set<std::string>{"order", "base_index", "center", "lambda", "radius",
	                                                              "psi_radius", "residual", "inverse_error",
	                                                              "coefficients", "inverse_coefficients"}));
	EXPECT_EQ(charts["charts"][0]["coefficients"].size(), 25u); // degrees 0 to 24
	const auto side = load(root / "o" / "gridmap.json");
	EXPECT_EQ(keys(side), (std::set<std::string>{"geometry", "solver_tol", "diagnostics", "sampling", "beltrami_residual",
	                                             "multipliers"}));
	const auto dump = io::read_gridmap(root / "o" / "gridmap.bin");
	EXPECT_EQ(dump.geometry.N, side["geometry"]["N"].get<int>());
	EXPECT_EQ(dump.geometry.half_width, side["geometry"]["half_width"].get<double>());
	// Numbers survive the text round trip bit for bit.
	for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(io::parse_double(io::format_double(x), "x"), x);
	// The configuration writer and reader agree.
	const Germ g({Complex(0.3, 0.2), Complex(1.0, -1.0)}, std::nullopt, 0.25);
	const Germ back = io::parse_germ(io::germ_to_json(g));
	EXPECT_EQ(back.radius(), g.radius());
	EXPECT_EQ(back.coeffs()[1], g.coeffs()[1]);
	EXPECT_THROW(io::read_csv(root / "o" / "gridmap.json", io::cycles_header), ConfigError);
}
