#include <doctest.h>

#include <filesystem>

#include "slicever/datagen.h"
#include "slicever/model_io.h"

using namespace slicever;

namespace {

verify::VerifierModel trained(verify::ClassifierKind kind) {
  datagen::GenConfig cfg = datagen::GenConfig::embb_oriented();
  cfg.n_samples = 1500;
  const auto corpus = datagen::sample_dataset(cfg);
  verify::VerifierParams params;
  params.classifier = kind;
  params.ensemble.rounds = 8;
  std::mt19937_64 rng(1);
  return verify::train_verifier(corpus, 0.4, params, rng);
}

}  // namespace

TEST_CASE("model serialization round trips exactly") {
  for (auto kind : {verify::ClassifierKind::kGbdt, verify::ClassifierKind::kTree}) {
    const auto model = trained(kind);
    const auto text = model_io::serialize_model(model);
    const auto back = model_io::parse_model(text);
    CHECK(back == model);
    CHECK(model_io::serialize_model(back) == text);

    const auto path = std::filesystem::temp_directory_path() / "slicever_test_model.json";
    model_io::save_model(model, path);
    CHECK(model_io::load_model(path) == model);
    std::filesystem::remove(path);
  }
}

TEST_CASE("bad model documents are rejected") {
  CHECK_THROWS_AS(model_io::parse_model("{"), ValidationError);
  CHECK_THROWS_AS(model_io::parse_model(R"({"format":"other","version":1})"), ValidationError);

  auto j = model_io::to_json(trained(verify::ClassifierKind::kTree));
  j["version"] = 99;
  CHECK_THROWS_WITH_AS(model_io::model_from_json(j), "model: unsupported version", ValidationError);

  auto links = model_io::to_json(trained(verify::ClassifierKind::kTree));
  links["classifier"]["nodes"][0]["left"] = 0;
  CHECK_THROWS_AS(model_io::model_from_json(links), ValidationError);

  auto missing = model_io::to_json(trained(verify::ClassifierKind::kGbdt));
  missing.erase("normalization");
  CHECK_THROWS_AS(model_io::model_from_json(missing), ValidationError);
}
