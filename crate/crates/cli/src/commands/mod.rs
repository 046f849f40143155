pub mod anachronism;
pub mod corpus;
pub mod demographics;
pub mod manifest;
pub mod report;
pub mod style;
pub mod validate;
