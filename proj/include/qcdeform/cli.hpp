#pragma once

// Subcommands of the qcdeform tool. Exit codes: 0 ok, 2 configuration error,
// 3 numerical failure (or a report outside its tolerance).

#include <qcdeform/diophantine.hpp>
#include <qcdeform/io.hpp>
#include <qcdeform/local_conjugacy.hpp>
#include <qcdeform/straightening.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace qcdeform::cli {

namespace fs = std::filesystem;
using io::json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_numerical = 3;

struct Options {
	std::string config;
	std::string out = ".";
	std::optional<int> grid;
	std::optional<double> tol;
};

namespace detail {

inline io::RunConfig load(const Options& opt) {
	auto cfg = io::load_run_config(opt.config);
	if (opt.grid) {
		if (*opt.grid < 16 || *opt.grid > 4096) throw ConfigError("--grid: must lie in [16, 4096]");
		cfg.solver.N = *opt.grid;
	}
	if (opt.tol) {
		if (!(*opt.tol > 0.0)) throw ConfigError("--tol: must be positive");
		cfg.solver.tol = *opt.tol;
	}
	std::error_code ec;
	fs::create_directories(opt.out, ec);
	if (ec) throw ConfigError("cannot create output directory " + opt.out);
	return cfg;
}

inline std::string num(double x) { return io::format_double(x); }

/// The usable cycle of the row's order nearest its point (or the origin).
inline Cycle select_cycle(const io::RunConfig& cfg, const io::DeformationRow& row) {
	const auto census = find_cycles(cfg.germ, row.order, cfg.seed_grid);
	const Complex anchor = row.point.value_or(Complex{0.0, 0.0});
	const Cycle* best = nullptr;
	double best_d = std::numeric_limits<double>::infinity();
	for (const auto& c : census.cycles) {
		if (!c.usable()) continue;
		for (const auto& z : c.points)
			if (std::abs(z - anchor) < best_d) best_d = std::abs(z - anchor), best = &c;
	}
	if (!best) throw ConfigError("deformations: no usable cycle of order " + std::to_string(row.order) + " in U");
	return *best;
}

inline BeltramiFieldSpec field_spec(const io::RunConfig& cfg) {
	std::vector<FieldEntry> entries;
	for (const auto& row : cfg.deformations) entries.push_back(make_entry(cfg.germ, select_cycle(cfg, row), row.target, cfg.chart));
	return BeltramiFieldSpec(cfg.germ, std::move(entries), cfg.transport_depth);
}

inline json diagnostics_json(const GridMap& map) {
	const auto& d = map.diagnostics();
	json changes = json::array();
	for (double c : d.changes) changes.push_back(c);
	return {{"sweeps", d.sweeps},
	        {"changes", changes},
	        {"sup_mu", d.sup_mu},
	        {"h_zero_raw", io::to_json(d.h_zero_raw)},
	        {"h_one_raw", io::to_json(d.h_one_raw)},
	        {"min_jacobian", d.min_jacobian}};
}

inline json geometry_json(const GridGeometry& geo) {
	return {{"N", geo.N}, {"center", io::to_json(geo.center)}, {"half_width", geo.half_width}};
}

} // namespace detail

inline int cmd_cycles(const Options& opt) {
	const auto cfg = detail::load(opt);
	io::CsvTable table{io::cycles_header, {}};
	json orders = json::array();
	for (int q : cfg.orders) {
		const auto census = find_cycles(cfg.germ, q, cfg.seed_grid);
		std::size_t usable = 0, repelling = 0;
		for (const auto& c : census.cycles) {
			usable += c.usable();
			repelling += c.usable() && c.kind == CycleKind::repelling;
			for (int i = 0; i < c.order; ++i)
				table.rows.push_back({std::to_string(q), std::to_string(i), detail::num(c.points[i].real()),
				                      detail::num(c.points[i].imag()), detail::num(c.multiplier.real()),
				                      detail::num(c.multiplier.imag()), std::string(to_string(c.kind))});
		}
		const auto& dg = census.diagnostics;
		orders.push_back({{"order", q},
		                  {"cycles", census.cycles.size()},
		                  {"usable", usable},
		                  {"repelling_usable", repelling},
		                  {"seeds", dg.seeds},
		                  {"non_converged", dg.non_converged},
		                  {"outside_domain", dg.outside_domain},
		                  {"non_primitive", dg.non_primitive},
		                  {"duplicates", dg.duplicates}});
	}
	io::write_text(fs::path(opt.out) / "cycles.csv", table.str());
	io::write_json(fs::path(opt.out) / "cycles_summary.json", {{"germ", io::germ_to_json(cfg.germ)}, {"orders", orders}});
	return exit_ok;
}

inline int cmd_koenigs(const Options& opt) {
	const auto cfg = detail::load(opt);
	json charts = json::array();
	for (int q : cfg.orders)
		for (const auto& c : repelling_cycles(cfg.germ, q, cfg.seed_grid))
			for (const auto& chart : build_cycle_charts(cfg.germ, c, cfg.chart)) {
				json coeffs = json::array(), inverse = json::array();
				for (const auto& a : chart.coefficients) coeffs.push_back(io::to_json(a));
				for (const auto& a : chart.inverse_coefficients) inverse.push_back(io::to_json(a));
				charts.push_back({{"order", q},
				                  {"base_index", chart.base_index},
				                  {"center", io::to_json(chart.center)},
				                  {"lambda", io::to_json(chart.lambda)},
				                  {"radius", chart.radius},
				                  {"psi_radius", chart.psi_radius},
				                  {"residual", chart.residual},
				                  {"inverse_error", chart.inverse_error},
				                  {"coefficients", coeffs},
				                  {"inverse_coefficients", inverse}});
			}
	io::write_json(fs::path(opt.out) / "charts.json", {{"charts", charts}});
	return exit_ok;
}

inline int cmd_deform_local(const Options& opt) {
	const auto cfg = detail::load(opt);
	if (cfg.deformations.empty()) throw ConfigError("deform-local: the deformation table is empty");
	json reports = json::array();
	bool all_ok = true;
	for (const auto& row : cfg.deformations) {
		const Cycle c = detail::select_cycle(cfg, row);
		const DeformedLocalGerm d{make_local_conjugacy(cfg.germ, c, row.target, cfg.chart), cfg.germ};
		const auto est = measure_multiplier(d, c.points[0], c.order);
		const double residual =
		    holomorphy_residual([&](Complex z) { return deformed_eval(d, z); }, c.points[0], est.radius);
		const bool ok = std::abs(est.value - row.target) < cfg.report_tol;
		all_ok = all_ok && ok;
		reports.push_back({{"order", c.order},
		                   {"cycle_point", io::to_json(c.points[0])},
		                   {"lambda", io::to_json(c.multiplier)},
		                   {"lambda_prime", io::to_json(row.target)},
		                   {"mu_K", io::to_json(d.conj.shear.mu_K)},
		                   {"measured_multiplier", io::to_json(est.value)},
		                   {"half_radius_multiplier", io::to_json(est.half_radius_value)},
		                   {"measurement_radius", est.radius},
		                   {"holomorphy_residual", residual},
		                   {"within_report_tol", ok}});
	}
	io::write_json(fs::path(opt.out) / "deform_local.json", {{"report_tol", cfg.report_tol}, {"reports", reports}});
	if (!all_ok) std::cerr << "deform-local: measured multiplier outside report_tol\n";
	return all_ok ? exit_ok : exit_numerical;
}

inline int cmd_straighten(const Options& opt) {
	const auto cfg = detail::load(opt);
	const auto spec = detail::field_spec(cfg);
	BeurlingSolver solver(germ_geometry(cfg.germ, cfg.solver));
	const auto sampling = sample_field(spec, solver.geometry());
	const auto d = DeformedGerm(std::make_shared<const GridMap>(solve_beltrami(solver, sampling.assemble(shear_values(spec)),
	                                                                           cfg.solver.tol, cfg.solver.max_sweeps,
	                                                                           cfg.solver.frame)),
	                            cfg.germ, spec);
	json multipliers = json::array();
	for (const auto& e : spec.entries()) {
		json m{{"order", e.chart.cycle.order},
		       {"cycle_point", io::to_json(e.chart.center)},
		       {"lambda", io::to_json(e.shear.lambda)},
		       {"lambda_prime", io::to_json(e.shear.lambda_prime)},
		       {"measured_multiplier", nullptr},
		       {"half_radius_multiplier", nullptr},
		       {"disagreement", nullptr},
		       {"status", "ok"}};
		// A coarse grid can leave the two contour estimates apart; the map itself is still reported.
		try {
			const auto est = measure_global_multiplier(d, e.chart.center, e.chart.cycle.order);
			m["measured_multiplier"] = io::to_json(est.value);
			m["half_radius_multiplier"] = io::to_json(est.half_radius_value);
			m["disagreement"] = est.disagreement;
		} catch (const Error& err) {
			m["status"] = err.what();
		}
		multipliers.push_back(std::move(m));
	}
	const auto res = beltrami_residual(d.map());
	io::write_gridmap(fs::path(opt.out) / "gridmap.bin", d.map());
	io::write_json(fs::path(opt.out) / "gridmap.json",
	               {{"geometry", detail::geometry_json(solver.geometry())},
	                {"solver_tol", cfg.solver.tol},
	                {"diagnostics", detail::diagnostics_json(d.map())},
	                {"sampling",
	                 {{"inside_chart", sampling.inside_chart},
	                  {"transported", sampling.transported},
	                  {"no_basin", sampling.no_basin},
	                  {"escaped", sampling.escaped},
	                  {"newton_failures", sampling.newton_failures},
	                  {"overlaps", sampling.overlaps}}},
	                {"beltrami_residual",
	                 {{"median", res.median}, {"p95", res.p95}, {"max", res.max}, {"l2", res.l2}, {"points", res.points}}},
	                {"multipliers", multipliers}});
	return exit_ok;
}

inline int cmd_motion(const Options& opt) {
	const auto cfg = detail::load(opt);
	MotionTemplate tpl{cfg.germ, {}, cfg.transport_depth};
	if (!cfg.deformations.empty()) {
		for (const auto& row : cfg.deformations) tpl.charts.push_back(build_chart(cfg.germ, detail::select_cycle(cfg, row), 0, cfg.chart));
	} else {
		for (int q : cfg.orders)
			for (const auto& c : repelling_cycles(cfg.germ, q, cfg.seed_grid)) tpl.charts.push_back(build_chart(cfg.germ, c, 0, cfg.chart));
	}
	std::vector<Complex> points = cfg.motion.points;
	if (points.empty()) {
		const double r = 0.6 * cfg.germ.radius();
		for (int a = 0; a < 5; ++a)
			for (int b = 0; b < 5; ++b) points.push_back({r * (a - 2) / 2.0, r * (b - 2) / 2.0});
	}
	for (const auto& z : points)
		if (!cfg.germ.contains(z)) throw ConfigError("motion.points: every point must lie in U");

	HolomorphicMotion motion(tpl, cfg.solver);
	const double s = cfg.motion.fd_step;
	json files = json::array(), per_t = json::array();
	double worst = 0.0;
	for (std::size_t k = 0; k < cfg.motion.t.size(); ++k) {
		const Complex t = cfg.motion.t[k];
		// One solve per stencil node, reused for every sample point.
		const Complex nodes[5] = {t, t + s, t - s, t + Complex{0.0, s}, t - Complex{0.0, s}};
		std::vector<std::shared_ptr<const GridMap>> maps;
		for (const auto& n : nodes) maps.push_back(motion.map_at(n));
		io::CsvTable table{io::motion_header, {}};
		double worst_t = 0.0;
		for (const auto& z : points) {
			const Complex h = (*maps[0])(z);
			const Complex fx = ((*maps[1])(z) - (*maps[2])(z)) / (2.0 * s);
			const Complex fy = ((*maps[3])(z) - (*maps[4])(z)) / (2.0 * s);
			const double dbar = std::abs(0.5 * (fx + Complex{0.0, 1.0} * fy));
			worst_t = std::max(worst_t, dbar);
			table.rows.push_back({detail::num(z.real()), detail::num(z.imag()), detail::num(h.real()), detail::num(h.imag()),
			                      detail::num(dbar)});
		}
		const std::string name = "motion_" + std::to_string(k) + ".csv";
		io::write_text(fs::path(opt.out) / name, table.str());
		files.push_back(name);
		per_t.push_back({{"t", io::to_json(t)}, {"file", name}, {"max_dbar_t", worst_t}, {"sweeps", maps[0]->diagnostics().sweeps}});
		worst = std::max(worst, worst_t);
	}
	io::write_json(fs::path(opt.out) / "motion_summary.json",
	               {{"geometry", detail::geometry_json(motion.geometry())},
	                {"fd_step", s},
	                {"cycles", tpl.charts.size()},
	                {"samples", per_t},
	                {"max_dbar_t", worst}});
	return exit_ok;
}

inline int cmd_cremer(const Options& opt) {
	const auto cfg = detail::load(opt);
	const auto& p = cfg.cremer;
	std::vector<BigInt> quotients;
	if (!p.quotients.empty()) {
		quotients.assign(p.quotients.begin(), p.quotients.end());
	} else if (p.pattern == "tower") {
		quotients = tower_quotients(1, static_cast<std::size_t>(p.count));
	} else {
		const std::string pattern = p.pattern.empty() ? "golden" : p.pattern;
		for (int k = 1; k <= p.count; ++k)
			quotients.push_back(pattern == "golden" ? 1 : pattern == "pell" ? 2 : k);
	}
	const std::size_t n = std::min(quotients.size(), static_cast<std::size_t>(p.count));
	if (n < 2) throw ConfigError("cremer: need at least two convergents");
	const auto cf = convergents_of(quotients, n);
	const auto rows = cremer_table(cf, p.degree);
	io::CsvTable table{io::cremer_header, {}};
	for (const auto& r : rows)
		table.rows.push_back({std::to_string(r.n), r.q.str(), r.ratio ? detail::num(*r.ratio) : "",
		                      r.margin ? detail::num(*r.margin) : ""});
	const std::size_t window = std::min(static_cast<std::size_t>(p.window), n - 1);
	const double margin = cremer_margin(cf, p.degree, window);
	io::write_text(fs::path(opt.out) / "cremer.csv", table.str());
	io::write_json(fs::path(opt.out) / "cremer.json",
	               {{"convergents", n},
	                {"degree", p.degree},
	                {"window", window},
	                {"margin", margin},
	                {"witnessed", margin > 0.0},
	                {"report", margin > 0.0 ? "condition witnessed in window" : "condition not witnessed"}});
	return exit_ok;
}

inline int cmd_render(const Options& opt) {
	const auto cfg = detail::load(opt);
	const auto spec = detail::field_spec(cfg);
	const int size = cfg.render_size;
	const double R = cfg.germ.radius();

	// |mu| raster and CSV over the square circumscribing U.
	io::Raster mu_raster(size, size, 0);
	io::CsvTable mu_table{io::mu_header, {}};
	std::vector<Complex> values(static_cast<std::size_t>(size) * size, Complex{0.0, 0.0});
	double sup = 0.0;
	for (int y = 0; y < size; ++y)
		for (int x = 0; x < size; ++x) {
			const Complex z{-R + (x + 0.5) * 2.0 * R / size, R - (y + 0.5) * 2.0 * R / size};
			Complex mu{0.0, 0.0};
			if (cfg.germ.contains(z) && !spec.entries().empty()) mu = field_value(spec, z);
			values[static_cast<std::size_t>(y) * size + x] = mu;
			sup = std::max(sup, std::abs(mu));
			mu_table.rows.push_back({detail::num(z.real()), detail::num(z.imag()), detail::num(mu.real()), detail::num(mu.imag())});
		}
	for (int y = 0; y < size; ++y)
		for (int x = 0; x < size; ++x) {
			const double v = sup > 0.0 ? std::abs(values[static_cast<std::size_t>(y) * size + x]) / sup : 0.0;
			const auto g = static_cast<std::uint8_t>(std::lround(255.0 * v));
			mu_raster.set(x, y, g, g, g);
		}
	io::write_ppm(fs::path(opt.out) / "mu.ppm", mu_raster);
	io::write_text(fs::path(opt.out) / "mu.csv", mu_table.str());

	// Image under h of a 24 x 24 mesh on the same square.
	const auto d = global_deform(spec, cfg.solver);
	const int lines = 24, per_line = 4 * size;
	std::vector<std::vector<Complex>> curves;
	double extent = 0.0;
	for (int dir = 0; dir < 2; ++dir)
		for (int l = 0; l <= lines; ++l) {
			std::vector<Complex> curve;
			const double a = -R + 2.0 * R * l / lines;
			for (int k = 0; k <= per_line; ++k) {
				const double b = -R + 2.0 * R * k / per_line;
				const Complex w = d.map()(dir == 0 ? Complex{a, b} : Complex{b, a});
				extent = std::max({extent, std::abs(w.real()), std::abs(w.imag())});
				curve.push_back(w);
			}
			curves.push_back(std::move(curve));
		}
	extent *= 1.05;
	io::Raster mesh(size, size, 255);
	for (const auto& curve : curves)
		for (const auto& w : curve) {
			const int x = static_cast<int>(std::floor((w.real() + extent) / (2.0 * extent) * size));
			const int y = static_cast<int>(std::floor((extent - w.imag()) / (2.0 * extent) * size));
			mesh.set(x, y, 0, 0, 0);
		}
	io::write_ppm(fs::path(opt.out) / "mesh.ppm", mesh);
	return exit_ok;
}

/// Entry point shared by the tool and the tests; args excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
	CLI::App app{"Quasi-conformal deformation of repelling cycles of polynomial germs"};
	app.require_subcommand(1);
	Options opt;
	using Cmd = int (*)(const Options&);
	const std::vector<std::pair<std::string, Cmd>> commands{
	    {"cycles", cmd_cycles},   {"koenigs", cmd_koenigs}, {"deform-local", cmd_deform_local}, {"straighten", cmd_straighten},
	    {"motion", cmd_motion},   {"cremer", cmd_cremer},   {"render", cmd_render}};
	std::vector<CLI::App*> subs;
	for (const auto& [name, fn] : commands) {
		auto* sub = app.add_subcommand(name);
		sub->add_option("--config", opt.config, "run configuration (JSON)")->required();
		sub->add_option("--out", opt.out, "output directory");
		sub->add_option("--grid", opt.grid, "solver grid size N");
		sub->add_option("--tol", opt.tol, "solver tolerance");
		subs.push_back(sub);
	}
	std::vector<std::string> argv_store{"qcdeform"};
	argv_store.insert(argv_store.end(), args.begin(), args.end());
	std::vector<char*> argv;
	for (auto& s : argv_store) argv.push_back(s.data());
	try {
		app.parse(static_cast<int>(argv.size()), argv.data());
	} catch (const CLI::CallForHelp& e) {
		std::cout << app.help();
		return exit_ok;
	} catch (const CLI::ParseError& e) {
		err << "qcdeform: " << e.what() << "\n";
		return exit_config;
	}
	try {
		for (std::size_t k = 0; k < subs.size(); ++k)
			if (subs[k]->parsed()) return commands[k].second(opt);
	} catch (const ConfigError& e) {
		err << "qcdeform: configuration error: " << e.what() << "\n";
		return exit_config;
	} catch (const std::exception& e) {
		err << "qcdeform: numerical failure: " << e.what() << "\n";
		return exit_numerical;
	}
	return exit_config;
}

} // namespace qcdeform::cli
