#include "swarmflow/verify.hpp"

#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace swarmflow {
namespace {

TEST(Verify, FullSuitePassesAndIsDeterministic) {
  const auto a = run_all_checks(0);
  const auto b = run_all_checks(0);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(a[i].passed) << a[i].name << ": " << a[i].max_residual << " > " << a[i].tolerance;
    EXPECT_EQ(a[i].passed, a[i].max_residual <= a[i].tolerance);
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].max_residual, b[i].max_residual);
    EXPECT_GT(a[i].trials, 0);
  }
}

TEST(Verify, OtherSeedsPass) {
  for (std::uint64_t seed : {1u, 17u, 123456u}) {
    for (const CheckReport& r : run_all_checks(seed)) EXPECT_TRUE(r.passed) << r.name << " seed " << seed;
  }
}

TEST(Verify, ShrunkToleranceFails) {
  bool any_failed = false;
  for (const CheckReport& r : run_all_checks(0, 1e-30)) any_failed = any_failed || !r.passed;
  EXPECT_TRUE(any_failed);
}

TEST(Verify, FreeSystemReductionRequiresFreeSystem) {
  EXPECT_THROW(check_free_system_reduction(LtiSystem::double_integrator(), 10, 0), DomainError);
  const CheckReport r = check_free_system_reduction(LtiSystem::identity_channel(2), 100, 3);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_EQ(r.tolerance, 1.0);
}

TEST(Verify, IndividualChecks) {
  const LtiSystem rot = LtiSystem::rotation2d(std::numbers::pi / 2);
  EXPECT_TRUE(check_additivity(rot, 100, 5).passed);
  EXPECT_TRUE(check_differential_identity(rot, 50, 5).passed);
  EXPECT_TRUE(check_differential_identity(LtiSystem::identity_channel(2), 50, 5).passed);
  EXPECT_TRUE(check_gramian_oracles(100, 5).passed);
}

TEST(Verify, JsonReport) {
  const auto reports = run_all_checks(2);
  const nlohmann::json j = nlohmann::json::parse(reports_to_json(reports));
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    EXPECT_EQ(j[i]["name"], reports[i].name);
    EXPECT_EQ(j[i]["passed"], reports[i].passed);
    EXPECT_EQ(j[i]["trials"], reports[i].trials);
    EXPECT_DOUBLE_EQ(j[i]["max_residual"].get<double>(), reports[i].max_residual);
    EXPECT_DOUBLE_EQ(j[i]["tolerance"].get<double>(), reports[i].tolerance);
  }
}

}  // namespace
}  // namespace swarmflow
