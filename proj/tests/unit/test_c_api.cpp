// SPDX-License-Identifier: Apache-2.0

#include "test_util.hpp"

#include <mvlstm/mvlstm.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include <fstream>

using nlohmann::json;
using mvlstm::test::scratch_dir;

namespace {

std::string take(char *s) {
  std::string out = s ? s : "";
  mvl_string_free(s);
  return out;
}

class CApi : public ::testing::Test {
protected:
  void SetUp() override {
    dir = scratch_dir("capi");
    data = (dir / "d.csv").string();
    ASSERT_EQ(mvl_generate(5, 400, 4, nullptr, data.c_str(),
                           (dir / "d.json").string().c_str()),
              MVL_OK);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }

  mvl_config *small_config() {
    mvl_config *cfg = nullptr;
    EXPECT_EQ(mvl_config_from_json(
                R"({"target_column":"y","window_T":4,"d_per_variable":3,
                    "max_epochs":2,"batch_size":16})",
                &cfg),
              MVL_OK);
    return cfg;
  }

  std::filesystem::path dir;
  std::string data;
};

} // namespace

TEST(CApiBasics, StatusNamesAndNulls) {
  EXPECT_STREQ(mvl_status_name(MVL_OK), "ok");
  EXPECT_NE(std::string(mvl_version()), "");
  EXPECT_EQ(mvl_config_new(nullptr), MVL_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(mvl_last_error()), "");
  EXPECT_EQ(mvl_config_key(0), std::string("target_column"));
  std::size_t n = 0;
  while (mvl_config_key(n))
    ++n;
  EXPECT_EQ(n, 16u);
  mvl_string_free(nullptr);
  mvl_config_free(nullptr);
  mvl_model_free(nullptr);
}

TEST(CApiBasics, ConfigErrors) {
  mvl_config *cfg = nullptr;
  EXPECT_EQ(mvl_config_from_json("{", &cfg), MVL_ERR_CONFIG);
  EXPECT_EQ(mvl_config_from_json(R"({"bogus":1})", &cfg), MVL_ERR_CONFIG);
  EXPECT_NE(std::string(mvl_last_error()).find("bogus"), std::string::npos);
  ASSERT_EQ(mvl_config_new(&cfg), MVL_OK);
  EXPECT_EQ(mvl_config_validate(cfg), MVL_ERR_CONFIG);
  EXPECT_EQ(mvl_config_set(cfg, "target_column", "y"), MVL_OK);
  EXPECT_EQ(mvl_config_set(cfg, "window_T", "8"), MVL_OK);
  EXPECT_EQ(mvl_config_validate(cfg), MVL_OK);
  EXPECT_EQ(mvl_config_set(cfg, "window_T", "-1"), MVL_ERR_CONFIG);
  EXPECT_EQ(mvl_config_set(cfg, "variant", "vanilla"), MVL_OK);
  char *text = nullptr;
  ASSERT_EQ(mvl_config_to_json(cfg, &text), MVL_OK);
  json j = json::parse(take(text));
  EXPECT_EQ(j["variant"], "vanilla");
  EXPECT_EQ(j["window_T"], 8);
  mvl_config_free(cfg);
  EXPECT_EQ(mvl_config_from_file("/nonexistent.json", &cfg), MVL_ERR_IO);
}

TEST(CApiBasics, Gradcheck) {
  double err = 1.0;
  for (const char *v : {"mvlstm", "mvfusion", "mvindep", "vanilla"}) {
    ASSERT_EQ(mvl_gradcheck(v, 3, 4, 5, 0, 0.0, &err), MVL_OK);
    EXPECT_LE(err, 1e-4) << v;
  }
  ASSERT_EQ(mvl_gradcheck("mvlstm", 3, 4, 5, 0, 0.01, &err), MVL_OK);
  EXPECT_GT(err, 1e-4);
  EXPECT_EQ(mvl_gradcheck("gru", 3, 4, 5, 0, 0.0, &err), MVL_ERR_CONFIG);
  EXPECT_EQ(mvl_gradcheck("mvlstm", 3, 4, 1, 0, 0.0, &err), MVL_ERR_CONTRACT);
}

TEST_F(CApi, GenerateValidation) {
  EXPECT_EQ(mvl_generate(1, 400, 3, nullptr, data.c_str(), nullptr),
            MVL_ERR_CONTRACT);
  EXPECT_EQ(mvl_generate(1, 400, 4, nullptr, nullptr, nullptr),
            MVL_ERR_INVALID_ARGUMENT);
  std::ifstream in(data);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "x0,x1,x2,x3,y");
}

TEST_F(CApi, TrainEvaluateInterpret) {
  mvl_config *cfg = small_config();
  const std::string ck = (dir / "c.json").string(),
                    log = (dir / "c.log.csv").string();
  double best = 0.0;
  ASSERT_EQ(mvl_train(cfg, data.c_str(), ck.c_str(), log.c_str(), &best),
            MVL_OK)
    << mvl_last_error();
  mvl_config_free(cfg);
  EXPECT_TRUE(std::filesystem::exists(log));

  mvl_model *model = nullptr;
  ASSERT_EQ(mvl_model_load(ck.c_str(), &model), MVL_OK);
  char *text = nullptr;
  ASSERT_EQ(mvl_model_info(model, &text), MVL_OK);
  json info = json::parse(take(text));
  EXPECT_EQ(info["variant"], "mvlstm");
  EXPECT_EQ(info["n_vars"], 5);
  EXPECT_EQ(info["d_per_variable"], 3);

  ASSERT_EQ(mvl_evaluate(model, data.c_str(), "valid", 0, &text), MVL_OK);
  json valid = json::parse(take(text));
  EXPECT_EQ(valid["rmse"].get<double>(), best);
  EXPECT_EQ(mvl_evaluate(model, data.c_str(), "dev", 0, &text),
            MVL_ERR_CONFIG);

  char *csv = nullptr;
  ASSERT_EQ(mvl_interpret(model, data.c_str(), "test", 10, 2, &text, &csv),
            MVL_OK);
  json rep = json::parse(take(text));
  EXPECT_EQ(rep["variables"].size(), 5u);
  EXPECT_NE(take(csv).find("posterior"), std::string::npos);
  EXPECT_EQ(mvl_interpret(model, data.c_str(), "test", 1, 1, &text, &csv),
            MVL_ERR_INVALID_ARGUMENT);

  // A dataset with a different variable count is a dimension error.
  const std::string other = (dir / "o.csv").string();
  ASSERT_EQ(mvl_generate(5, 400, 5, nullptr, other.c_str(), nullptr), MVL_OK);
  EXPECT_EQ(mvl_evaluate(model, other.c_str(), "test", 0, &text),
            MVL_ERR_DIMENSION);
  mvl_model_free(model);

  EXPECT_EQ(mvl_model_load((dir / "missing.json").string().c_str(), &model),
            MVL_ERR_IO);
}

TEST_F(CApi, TrainErrors) {
  mvl_config *cfg = small_config();
  double best = 0.0;
  const std::string ck = (dir / "c.json").string();
  EXPECT_EQ(mvl_train(cfg, (dir / "none.csv").string().c_str(), ck.c_str(),
                      nullptr, &best),
            MVL_ERR_IO);
  ASSERT_EQ(mvl_config_set(cfg, "target_column", "\"nope\""), MVL_OK);
  EXPECT_EQ(mvl_train(cfg, data.c_str(), ck.c_str(), nullptr, &best),
            MVL_ERR_CONFIG);
  EXPECT_NE(std::string(mvl_last_error()).find("nope"), std::string::npos);
  mvl_config_free(cfg);
}
