#pragma once

// File formats: run configuration (strict JSON), CSV tables, the GridMap binary
// dump and PPM rasters. Every writer has a reader so outputs can be re-parsed.

#include <qcdeform/straightening.hpp>

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace qcdeform::io {

using json = nlohmann::json;

// ---------------------------------------------------------------- numbers

inline std::string format_double(double x) {
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.17g", x);
	return buf;
}

inline double parse_double(const std::string& s, const char* what) {
	std::size_t used = 0;
	double v = 0.0;
	try {
		v = std::stod(s, &used);
	} catch (const std::exception&) {
		throw ConfigError(std::string(what) + ": not a number: '" + s + "'");
	}
	if (used != s.size()) throw ConfigError(std::string(what) + ": trailing characters in '" + s + "'");
	return v;
}

inline json to_json(Complex z) { return json::array({z.real(), z.imag()}); }

// ---------------------------------------------------------------- strict JSON

namespace detail {

inline void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
	if (!j.is_object()) throw ConfigError(where + ": expected an object");
	for (const auto& [key, value] : j.items())
		if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

inline double get_number(const json& j, const std::string& where) {
	if (!j.is_number()) throw ConfigError(where + ": expected a number");
	const double v = j.get<double>();
	if (!std::isfinite(v)) throw ConfigError(where + ": not finite");
	return v;
}

inline long long get_integer(const json& j, const std::string& where) {
	if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
	return j.get<long long>();
}

inline Complex get_complex(const json& j, const std::string& where) {
	if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [re, im]");
	return {get_number(j[0], where + "[0]"), get_number(j[1], where + "[1]")};
}

inline std::optional<double> get_optional_number(const json& j, const std::string& key, const std::string& where) {
	if (!j.contains(key) || j[key].is_null()) return std::nullopt;
	return get_number(j[key], where + "." + key);
}

} // namespace detail

/// {"coeffs": [[re, im], ...], "alpha": number|null, "radius_U": number|null}
inline Germ parse_germ(const json& j) {
	detail::require_keys(j, {"coeffs", "alpha", "radius_U"}, "germ");
	if (!j.contains("coeffs") || !j["coeffs"].is_array()) throw ConfigError("germ.coeffs: required array");
	std::vector<Complex> coeffs;
	for (std::size_t k = 0; k < j["coeffs"].size(); ++k)
		coeffs.push_back(detail::get_complex(j["coeffs"][k], "germ.coeffs[" + std::to_string(k) + "]"));
	try {
		return Germ(std::move(coeffs), detail::get_optional_number(j, "alpha", "germ"),
		            detail::get_optional_number(j, "radius_U", "germ"));
	} catch (const DomainError& e) {
		throw ConfigError(std::string("germ: ") + e.what());
	}
}

inline json germ_to_json(const Germ& g) {
	json coeffs = json::array();
	for (const auto& c : g.coeffs()) coeffs.push_back(to_json(c));
	return {{"coeffs", coeffs}, {"alpha", g.alpha() ? json(*g.alpha()) : json(nullptr)}, {"radius_U", g.radius()}};
}

/// One row of the deformation table: the cycle of `order` nearest `point`
/// (default: the nearest to 0) gets multiplier `target`.
struct DeformationRow {
	int order = 1;
	Complex target{0.0, 0.0};
	std::optional<Complex> point;
};

struct MotionParams {
	std::vector<Complex> t{Complex{0.3, 0.0}};
	std::vector<Complex> points;
	double fd_step = 1e-3;
};

struct CremerParams {
	std::vector<long long> quotients; // explicit a_1, a_2, ...
	std::string pattern;              // or one of: golden, pell, linear, tower
	int count = 40;
	int degree = 2;
	int window = 20;
};

struct RunConfig {
	Germ germ = Germ::identity();
	std::vector<int> orders{1};
	int seed_grid = 16;
	std::vector<DeformationRow> deformations;
	SolverConfig solver;
	ChartOptions chart;
	int transport_depth = 200;
	double report_tol = 1e-5;
	MotionParams motion;
	CremerParams cremer;
	int render_size = 256;
};

inline RunConfig parse_run_config(const json& j) {
	using namespace detail;
	require_keys(j, {"germ", "orders", "seed_grid", "deformations", "solver", "chart", "transport_depth", "report_tol",
	                 "motion", "cremer", "render"},
	             "config");
	RunConfig cfg;
	if (j.contains("germ")) cfg.germ = parse_germ(j["germ"]);
	if (j.contains("orders")) {
		if (!j["orders"].is_array() || j["orders"].empty()) throw ConfigError("orders: expected a non-empty array");
		cfg.orders.clear();
		for (const auto& q : j["orders"]) {
			const long long v = get_integer(q, "orders[]");
			if (v < 1 || v > 64) throw ConfigError("orders: every order must lie in [1, 64]");
			cfg.orders.push_back(static_cast<int>(v));
		}
	}
	if (j.contains("seed_grid")) {
		const long long v = get_integer(j["seed_grid"], "seed_grid");
		if (v < 1 || v > 4096) throw ConfigError("seed_grid: must lie in [1, 4096]");
		cfg.seed_grid = static_cast<int>(v);
	}
	if (j.contains("deformations")) {
		if (!j["deformations"].is_array()) throw ConfigError("deformations: expected an array");
		for (const auto& row : j["deformations"]) {
			require_keys(row, {"order", "target", "point"}, "deformations[]");
			if (!row.contains("order") || !row.contains("target"))
				throw ConfigError("deformations[]: order and target are required");
			DeformationRow d;
			const long long q = get_integer(row["order"], "deformations[].order");
			if (q < 1 || q > 64) throw ConfigError("deformations[].order: must lie in [1, 64]");
			d.order = static_cast<int>(q);
			d.target = get_complex(row["target"], "deformations[].target");
			if (!(std::abs(d.target) > 1.0)) throw ConfigError("deformations[].target: modulus must exceed 1");
			if (row.contains("point")) d.point = get_complex(row["point"], "deformations[].point");
			cfg.deformations.push_back(d);
		}
	}
	if (j.contains("solver")) {
		const json& s = j["solver"];
		require_keys(s, {"N", "half_width", "center", "tol", "max_sweeps", "frame"}, "solver");
		if (s.contains("N")) {
			const long long n = get_integer(s["N"], "solver.N");
			if (n < 16 || n > 4096) throw ConfigError("solver.N: must lie in [16, 4096]");
			cfg.solver.N = static_cast<int>(n);
		}
		cfg.solver.half_width = get_optional_number(s, "half_width", "solver");
		if (cfg.solver.half_width && *cfg.solver.half_width <= 0.0) throw ConfigError("solver.half_width: must be positive");
		if (s.contains("center")) cfg.solver.center = get_complex(s["center"], "solver.center");
		if (s.contains("tol")) cfg.solver.tol = get_number(s["tol"], "solver.tol");
		if (!(cfg.solver.tol > 0.0)) throw ConfigError("solver.tol: must be positive");
		if (s.contains("max_sweeps")) {
			const long long m = get_integer(s["max_sweeps"], "solver.max_sweeps");
			if (m < 1 || m > 100000) throw ConfigError("solver.max_sweeps: must lie in [1, 100000]");
			cfg.solver.max_sweeps = static_cast<int>(m);
		}
		if (s.contains("frame")) cfg.solver.frame = get_number(s["frame"], "solver.frame");
		if (!(cfg.solver.frame >= 0.0 && cfg.solver.frame < 0.5)) throw ConfigError("solver.frame: must lie in [0, 0.5)");
	}
	if (j.contains("chart")) {
		require_keys(j["chart"], {"order", "radius_cap"}, "chart");
		if (j["chart"].contains("order")) {
			const long long m = get_integer(j["chart"]["order"], "chart.order");
			if (m < 2 || m > 200) throw ConfigError("chart.order: must lie in [2, 200]");
			cfg.chart.order = static_cast<std::size_t>(m);
		}
		cfg.chart.radius_cap = get_optional_number(j["chart"], "radius_cap", "chart");
	}
	if (j.contains("transport_depth")) {
		const long long v = get_integer(j["transport_depth"], "transport_depth");
		if (v < 1 || v > 100000) throw ConfigError("transport_depth: must lie in [1, 100000]");
		cfg.transport_depth = static_cast<int>(v);
	}
	if (j.contains("report_tol")) {
		cfg.report_tol = get_number(j["report_tol"], "report_tol");
		if (!(cfg.report_tol > 0.0)) throw ConfigError("report_tol: must be positive");
	}
	if (j.contains("motion")) {
		const json& m = j["motion"];
		require_keys(m, {"t", "points", "fd_step"}, "motion");
		if (m.contains("t")) {
			if (!m["t"].is_array() || m["t"].empty()) throw ConfigError("motion.t: expected a non-empty array");
			cfg.motion.t.clear();
			for (const auto& t : m["t"]) {
				const Complex v = get_complex(t, "motion.t[]");
				if (!(std::abs(v) > 0.0 && std::abs(v) < 1.0)) throw ConfigError("motion.t: need 0 < |t| < 1");
				cfg.motion.t.push_back(v);
			}
		}
		if (m.contains("points")) {
			if (!m["points"].is_array()) throw ConfigError("motion.points: expected an array");
			for (const auto& p : m["points"]) cfg.motion.points.push_back(get_complex(p, "motion.points[]"));
		}
		if (m.contains("fd_step")) cfg.motion.fd_step = get_number(m["fd_step"], "motion.fd_step");
		if (!(cfg.motion.fd_step > 0.0)) throw ConfigError("motion.fd_step: must be positive");
	}
	if (j.contains("cremer")) {
		const json& c = j["cremer"];
		require_keys(c, {"quotients", "pattern", "count", "degree", "window"}, "cremer");
		if (c.contains("quotients")) {
			if (!c["quotients"].is_array()) throw ConfigError("cremer.quotients: expected an array");
			for (const auto& a : c["quotients"]) {
				const long long v = get_integer(a, "cremer.quotients[]");
				if (v < 1) throw ConfigError("cremer.quotients: must be positive");
				cfg.cremer.quotients.push_back(v);
			}
		}
		if (c.contains("pattern")) {
			if (!c["pattern"].is_string()) throw ConfigError("cremer.pattern: expected a string");
			cfg.cremer.pattern = c["pattern"].get<std::string>();
			if (cfg.cremer.pattern != "golden" && cfg.cremer.pattern != "pell" && cfg.cremer.pattern != "linear" &&
			    cfg.cremer.pattern != "tower")
				throw ConfigError("cremer.pattern: expected golden, pell, linear or tower");
		}
		if (!cfg.cremer.quotients.empty() && !cfg.cremer.pattern.empty())
			throw ConfigError("cremer: give either quotients or pattern");
		auto bounded = [&](const char* key, int lo, int hi, int& out) {
			if (!c.contains(key)) return;
			const long long v = get_integer(c[key], std::string("cremer.") + key);
			if (v < lo || v > hi) throw ConfigError(std::string("cremer.") + key + ": out of range");
			out = static_cast<int>(v);
		};
		bounded("count", 1, 100000, cfg.cremer.count);
		bounded("degree", 2, 1000000, cfg.cremer.degree);
		bounded("window", 1, 100000, cfg.cremer.window);
	}
	if (j.contains("render")) {
		require_keys(j["render"], {"size"}, "render");
		if (j["render"].contains("size")) {
			const long long v = get_integer(j["render"]["size"], "render.size");
			if (v < 8 || v > 8192) throw ConfigError("render.size: must lie in [8, 8192]");
			cfg.render_size = static_cast<int>(v);
		}
	}
	return cfg;
}

inline json read_json_file(const std::filesystem::path& path) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open " + path.string());
	try {
		return json::parse(in);
	} catch (const json::parse_error& e) {
		throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
	}
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_json_file(path)); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
	std::ofstream out(path, std::ios::binary);
	if (!out) throw Error("cannot write " + path.string());
	out << text;
	if (!out) throw Error("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- CSV

struct CsvTable {
	std::vector<std::string> header;
	std::vector<std::vector<std::string>> rows;

	std::string str() const {
		std::string out;
		auto line = [&](const std::vector<std::string>& cells) {
			for (std::size_t k = 0; k < cells.size(); ++k) {
				if (k) out += ',';
				out += cells[k];
			}
			out += '\n';
		};
		line(header);
		for (const auto& r : rows) line(r);
		return out;
	}
};

/// Reads a CSV written by CsvTable; the header must equal `expected`.
inline CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open " + path.string());
	auto split = [](const std::string& line) {
		std::vector<std::string> cells;
		std::stringstream ss(line);
		std::string cell;
		while (std::getline(ss, cell, ',')) cells.push_back(cell);
		if (!line.empty() && line.back() == ',') cells.emplace_back();
		return cells;
	};
	CsvTable t;
	std::string line;
	if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty CSV");
	t.header = split(line);
	if (t.header != expected) throw ConfigError(path.string() + ": unexpected CSV header");
	while (std::getline(in, line)) {
		auto cells = split(line);
		if (cells.size() != expected.size()) throw ConfigError(path.string() + ": wrong number of cells");
		t.rows.push_back(std::move(cells));
	}
	return t;
}

inline const std::vector<std::string> cycles_header{"order", "point_index", "re", "im", "mult_re", "mult_im", "kind"};
inline const std::vector<std::string> mu_header{"x", "y", "mu_re", "mu_im"};
inline const std::vector<std::string> cremer_header{"n", "q_n", "ratio", "margin"};
inline const std::vector<std::string> motion_header{"z_re", "z_im", "h_re", "h_im", "dbar_t_abs"};

// ---------------------------------------------------------------- GridMap dump

/// Little-endian: int64 N, float64 center re, center im, half width, then
/// N*N (re, im) float64 pairs in row-major order (row = imaginary index).
inline void write_gridmap(const std::filesystem::path& path, const GridMap& map) {
	static_assert(std::endian::native == std::endian::little, "gridmap dump assumes a little-endian host");
	std::ofstream out(path, std::ios::binary);
	if (!out) throw Error("cannot write " + path.string());
	const auto& geo = map.geometry();
	const std::int64_t n = geo.N;
	const double header[3] = {geo.center.real(), geo.center.imag(), geo.half_width};
	out.write(reinterpret_cast<const char*>(&n), sizeof n);
	out.write(reinterpret_cast<const char*>(header), sizeof header);
	out.write(reinterpret_cast<const char*>(map.samples().data()),
	          static_cast<std::streamsize>(map.samples().size() * sizeof(Complex)));
	if (!out) throw Error("write failed for " + path.string());
}

struct GridDump {
	GridGeometry geometry;
	std::vector<Complex> samples;
};

inline GridDump read_gridmap(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw ConfigError("cannot open " + path.string());
	std::int64_t n = 0;
	double header[3];
	in.read(reinterpret_cast<char*>(&n), sizeof n);
	in.read(reinterpret_cast<char*>(header), sizeof header);
	if (!in || n < 1 || n > 65536) throw ConfigError(path.string() + ": bad gridmap header");
	GridDump d{GridGeometry{static_cast<int>(n), {header[0], header[1]}, header[2]}, {}};
	d.samples.resize(static_cast<std::size_t>(n) * n);
	in.read(reinterpret_cast<char*>(d.samples.data()), static_cast<std::streamsize>(d.samples.size() * sizeof(Complex)));
	if (!in || in.peek() != std::char_traits<char>::eof()) throw ConfigError(path.string() + ": gridmap size mismatch");
	return d;
}

// ---------------------------------------------------------------- PPM

struct Raster {
	int width = 0, height = 0;
	std::vector<std::uint8_t> rgb; // row-major, top row first

	Raster(int w, int h, std::uint8_t fill = 255) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}
	void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
		if (x < 0 || y < 0 || x >= width || y >= height) return;
		const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
		rgb[i] = r, rgb[i + 1] = g, rgb[i + 2] = b;
	}
};

inline void write_ppm(const std::filesystem::path& path, const Raster& r) {
	std::string out = "P6\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
	out.append(reinterpret_cast<const char*>(r.rgb.data()), r.rgb.size());
	write_text(path, out);
}

inline Raster read_ppm(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw ConfigError("cannot open " + path.string());
	std::string magic;
	int w = 0, h = 0, maxval = 0;
	in >> magic >> w >> h >> maxval;
	if (magic != "P6" || w < 1 || h < 1 || maxval != 255) throw ConfigError(path.string() + ": not an 8-bit P6 raster");
	in.get();
	Raster r(w, h);
	in.read(reinterpret_cast<char*>(r.rgb.data()), static_cast<std::streamsize>(r.rgb.size()));
	if (!in || in.peek() != std::char_traits<char>::eof()) throw ConfigError(path.string() + ": truncated raster");
	return r;
}

} // namespace qcdeform::io
