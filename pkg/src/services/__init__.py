"""Services package."""



