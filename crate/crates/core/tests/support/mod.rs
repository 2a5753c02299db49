pub mod sync_cases;
