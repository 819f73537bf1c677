pub mod allocation;
pub mod backends;
pub mod grpo;
pub mod harness;
pub mod netenv;
pub mod repair;
pub mod reward;
pub mod seed;
pub mod serializer;
pub mod solvers;
