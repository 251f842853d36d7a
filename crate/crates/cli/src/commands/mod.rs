pub mod diagram;
pub mod profiles;
pub mod timemap;
pub mod verify;
