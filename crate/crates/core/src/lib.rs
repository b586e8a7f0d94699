// SPDX-License-Identifier: Apache-2.0

pub mod commitcpg;
pub mod embed;
pub mod ingest;
pub mod keywords;
pub mod model;
pub mod patterns;
pub mod pipeline;
pub mod pycpg;
pub mod store;
