#include <filesystem>
#include <fstream>

#include "catch_amalgamated.hpp"
#include "fracnl/config.hpp"

using namespace fracnl;

TEST_CASE("level ranges and lists", "[config]") {
  CHECK(parse_levels("6..9") == std::vector<int>{6, 7, 8, 9});
  CHECK(parse_levels(" 3 .. 3 ") == std::vector<int>{3});
  CHECK(parse_levels("7") == std::vector<int>{7});
  CHECK(parse_levels("3,5,6") == std::vector<int>{3, 5, 6});
  CHECK_THROWS_AS(parse_levels("9..6"), InvalidArgument);
  CHECK_THROWS_AS(parse_levels("0..3"), InvalidArgument);
  CHECK_THROWS_AS(parse_levels("21"), InvalidArgument);
  CHECK_THROWS_AS(parse_levels("6..x"), InvalidArgument);
  CHECK_THROWS_AS(parse_levels(""), InvalidArgument);
}

TEST_CASE("alpha and norm lists", "[config]") {
  CHECK(parse_alpha_list("0.4,0.7") == std::vector<double>{0.4, 0.7});
  CHECK(parse_alpha_list(" 0.5 ") == std::vector<double>{0.5});
  CHECK_THROWS_AS(parse_alpha_list("0.4,,0.7"), InvalidArgument);
  CHECK_THROWS_AS(parse_alpha_list("1"), InvalidArgument);
  CHECK_THROWS_AS(parse_alpha_list("0"), InvalidArgument);
  CHECK_THROWS_AS(parse_alpha_list("0.5x"), InvalidArgument);
  CHECK(parse_norm_list("l2,h1,l2-time") ==
        std::vector<NormKind>{NormKind::l2_space, NormKind::h1_space, NormKind::l2_time});
  CHECK_THROWS_AS(parse_norm_list("l2,max"), InvalidArgument);
}

TEST_CASE("settings map onto the run configuration", "[config]") {
  RunConfig cfg;
  apply_setting(cfg, "problem", "ex2");
  apply_setting(cfg, "alpha", "0.5,0.9");
  apply_setting(cfg, "levels", "3..6");
  apply_setting(cfg, "norms", "h1");
  apply_setting(cfg, "tol", "1e-9");
  apply_setting(cfg, "out", "results");
  apply_setting(cfg, "gradient_degree", "1");
  apply_setting(cfg, "load_degree", "6");
  apply_setting(cfg, "error_degree", "7");
  apply_setting(cfg, "forcing", "point");
  CHECK(cfg.problem == "ex2");
  CHECK(cfg.alphas == std::vector<double>{0.5, 0.9});
  CHECK(cfg.levels == std::vector<int>{3, 4, 5, 6});
  CHECK(cfg.norms == std::vector<NormKind>{NormKind::h1_space});
  CHECK(cfg.tol == 1e-9);
  CHECK(cfg.out == "results");
  CHECK(cfg.gradient_degree == 1);
  CHECK(cfg.load_degree == 6);
  CHECK(cfg.error_degree == 7);
  CHECK(cfg.forcing == ForcingSample::shifted_point);
  CHECK_THROWS_AS(apply_setting(cfg, "colour", "red"), InvalidArgument);
  CHECK_THROWS_AS(apply_setting(cfg, "tol", "small"), InvalidArgument);
  CHECK_THROWS_AS(apply_setting(cfg, "forcing", "midpoint"), InvalidArgument);
}

TEST_CASE("config files with sections", "[config]") {
  const ConfigFile file = parse_config_text(
      "# defaults\n"
      "problem = ex2\n"
      "\n"
      "[common]\n"
      "tol=1e-8\n"
      "; study only\n"
      "[study]\n"
      "levels = 3..4\n"
      "problem = ex1\n"
      "[solve]\n"
      "levels = 5\n");
  RunConfig study_cfg;
  apply_config(study_cfg, file, "study");
  CHECK(study_cfg.problem == "ex1");
  CHECK(study_cfg.tol == 1e-8);
  CHECK(study_cfg.levels == std::vector<int>{3, 4});
  RunConfig solve_cfg;
  apply_config(solve_cfg, file, "solve");
  CHECK(solve_cfg.problem == "ex2");
  CHECK(solve_cfg.levels == std::vector<int>{5});
  RunConfig verify_cfg;
  apply_config(verify_cfg, file, "verify");
  CHECK(verify_cfg.levels == RunConfig{}.levels);
  CHECK(verify_cfg.tol == 1e-8);
}

TEST_CASE("malformed config files", "[config]") {
  CHECK_THROWS_AS(parse_config_text("problem\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config_text("[study\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config_text("[]\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config_text(" = 3\n"), InvalidArgument);
  try {
    parse_config_text("tol=1\n\nbroken\n");
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  RunConfig cfg;
  CHECK_THROWS_AS(apply_config(cfg, parse_config_text("speed=3\n"), "study"), InvalidArgument);
  CHECK_THROWS_AS(load_config_file("/nonexistent/fracnl.cfg"), InvalidArgument);
}

TEST_CASE("config files load from disk", "[config]") {
  const auto path = std::filesystem::temp_directory_path() / "fracnl_test_config.cfg";
  {
    std::ofstream out(path);
    out << "alpha=0.3\r\nlevels=2..3\r\n";
  }
  RunConfig cfg;
  apply_config(cfg, load_config_file(path.string()), "study");
  CHECK(cfg.alphas == std::vector<double>{0.3});
  CHECK(cfg.levels == std::vector<int>{2, 3});
  std::filesystem::remove(path);
}
