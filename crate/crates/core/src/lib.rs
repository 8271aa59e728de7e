pub mod harness;
pub mod kv;
pub mod plant;
pub mod policy;
pub mod sigproc;
pub mod trainer;
