bool remove(int key){
  while(true){
    struct node * gparent = NULL;
    struct node * parent = NULL;
    struct node * curr = root;
    while(curr->left != NULL && curr->right != NULL){
      gparent = parent;
      parent = curr;
      if(curr->key <= key)
        curr = curr->right;
      else
        curr = curr->left;
    }
    if(curr->key != key || gparent == NULL)
      return false;
    if(gparent->left == parent && parent->left == curr){
      @@delete::block1
      return true;
    }
    if(gparent->left == parent && parent->right == curr){
      @@delete::block2
      return true;
    }
    if(gparent->right == parent && parent->left == curr){
      @@delete::block3
      return true;
    }
    if(gparent->right == parent && parent->right == curr){
      @@delete::block4
      return true;
    }
    return false;
  }
}
