#pragma once

#include <gtest/gtest.h>

#include "amiagg/error.hpp"

#define EXPECT_PROTOCOL_ERROR(stmt, ec)                 \
  do {                                                  \
    try {                                               \
      stmt;                                             \
      ADD_FAILURE() << "expected " << ToString(ec);     \
    } catch (const ::amiagg::ProtocolError& e) {        \
      EXPECT_EQ(e.code(), ec) << e.what();              \
    }                                                   \
  } while (0)
