#ifndef MALFOX_MALFOX_HPP
#define MALFOX_MALFOX_HPP

#include <malfox/bytes.hpp>
#include <malfox/corpus.hpp>
#include <malfox/csv.hpp>
#include <malfox/detector.hpp>
#include <malfox/error.hpp>
#include <malfox/fixtures.hpp>
#include <malfox/kv.hpp>
#include <malfox/nn/checkpoint.hpp>
#include <malfox/nn/layers.hpp>
#include <malfox/nn/loss.hpp>
#include <malfox/nn/models.hpp>
#include <malfox/nn/net.hpp>
#include <malfox/nn/ops.hpp>
#include <malfox/nn/optimizer.hpp>
#include <malfox/nn/tensor.hpp>
#include <malfox/pe_editor.hpp>
#include <malfox/pe_model.hpp>
#include <malfox/pe_parser.hpp>
#include <malfox/trainer.hpp>

#endif // MALFOX_MALFOX_HPP
