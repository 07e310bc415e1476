#pragma once

namespace passage {

#ifdef PASSAGE_VERSION
inline constexpr const char* kVersion = PASSAGE_VERSION;
#else
inline constexpr const char* kVersion = "0.0.0";
#endif

}  // namespace passage
