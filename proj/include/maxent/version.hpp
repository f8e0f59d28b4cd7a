#pragma once

namespace maxent {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kConfigSchema = "maxent-config/1";
inline constexpr const char* kReportSchema = "maxent-report/1";

}  // namespace maxent
