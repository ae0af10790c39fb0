// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

pub mod codec;
pub mod contract;
pub mod crypto;
pub mod dac;
pub mod kzg;
pub mod rollup;
pub mod sim;
pub mod vm;
