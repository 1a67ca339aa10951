#pragma once

#include <pbo/combinatorics.hpp>
#include <pbo/constraint.hpp>
#include <pbo/distributions.hpp>
#include <pbo/objectives.hpp>
#include <pbo/optimizer.hpp>
#include <pbo/oracle.hpp>
#include <pbo/sampling.hpp>
#include <pbo/types.hpp>
