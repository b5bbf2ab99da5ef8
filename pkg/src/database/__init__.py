"""Database package."""



